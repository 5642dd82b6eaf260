//! Bundled IFC4 entity-definition subset: supertype links and the full
//! (inherited) attribute list of each class.
//!
//! Types outside this table still parse and serialize; they are simply not
//! arity-checked and their attributes are addressed positionally.

use std::collections::HashMap;
use std::sync::OnceLock;

/// (name, supertype, abstract, attributes declared on this class)
type RawDef = (&'static str, Option<&'static str>, bool, &'static [&'static str]);

const RAW: &[RawDef] = &[
    ("IfcRoot", None, true, &["GlobalId", "OwnerHistory", "Name", "Description"]),
    ("IfcObjectDefinition", Some("IfcRoot"), true, &[]),
    ("IfcObject", Some("IfcObjectDefinition"), true, &["ObjectType"]),
    (
        "IfcContext",
        Some("IfcObjectDefinition"),
        true,
        &["ObjectType", "LongName", "Phase", "RepresentationContexts", "UnitsInContext"],
    ),
    ("IfcProject", Some("IfcContext"), false, &[]),
    ("IfcProjectLibrary", Some("IfcContext"), false, &[]),
    ("IfcProduct", Some("IfcObject"), true, &["ObjectPlacement", "Representation"]),
    ("IfcElement", Some("IfcProduct"), true, &["Tag"]),
    ("IfcBuildingElement", Some("IfcElement"), true, &[]),
    ("IfcWall", Some("IfcBuildingElement"), false, &["PredefinedType"]),
    ("IfcWallStandardCase", Some("IfcWall"), false, &[]),
    ("IfcSlab", Some("IfcBuildingElement"), false, &["PredefinedType"]),
    (
        "IfcDoor",
        Some("IfcBuildingElement"),
        false,
        &["OverallHeight", "OverallWidth", "PredefinedType", "OperationType", "UserDefinedOperationType"],
    ),
    (
        "IfcWindow",
        Some("IfcBuildingElement"),
        false,
        &["OverallHeight", "OverallWidth", "PredefinedType", "PartitioningType", "UserDefinedPartitioningType"],
    ),
    ("IfcColumn", Some("IfcBuildingElement"), false, &["PredefinedType"]),
    ("IfcBeam", Some("IfcBuildingElement"), false, &["PredefinedType"]),
    ("IfcMember", Some("IfcBuildingElement"), false, &["PredefinedType"]),
    ("IfcPlate", Some("IfcBuildingElement"), false, &["PredefinedType"]),
    ("IfcRoof", Some("IfcBuildingElement"), false, &["PredefinedType"]),
    ("IfcStair", Some("IfcBuildingElement"), false, &["PredefinedType"]),
    ("IfcRamp", Some("IfcBuildingElement"), false, &["PredefinedType"]),
    ("IfcRailing", Some("IfcBuildingElement"), false, &["PredefinedType"]),
    ("IfcCovering", Some("IfcBuildingElement"), false, &["PredefinedType"]),
    ("IfcCurtainWall", Some("IfcBuildingElement"), false, &["PredefinedType"]),
    ("IfcFooting", Some("IfcBuildingElement"), false, &["PredefinedType"]),
    ("IfcBuildingElementProxy", Some("IfcBuildingElement"), false, &["PredefinedType"]),
    ("IfcFeatureElement", Some("IfcElement"), true, &[]),
    ("IfcFeatureElementSubtraction", Some("IfcFeatureElement"), true, &[]),
    ("IfcOpeningElement", Some("IfcFeatureElementSubtraction"), false, &["PredefinedType"]),
    ("IfcFurnishingElement", Some("IfcElement"), false, &[]),
    ("IfcFurniture", Some("IfcFurnishingElement"), false, &["PredefinedType"]),
    ("IfcSpatialElement", Some("IfcProduct"), true, &["LongName"]),
    ("IfcSpatialStructureElement", Some("IfcSpatialElement"), true, &["CompositionType"]),
    (
        "IfcSite",
        Some("IfcSpatialStructureElement"),
        false,
        &["RefLatitude", "RefLongitude", "RefElevation", "LandTitleNumber", "SiteAddress"],
    ),
    (
        "IfcBuilding",
        Some("IfcSpatialStructureElement"),
        false,
        &["ElevationOfRefHeight", "ElevationOfTerrain", "BuildingAddress"],
    ),
    ("IfcBuildingStorey", Some("IfcSpatialStructureElement"), false, &["Elevation"]),
    ("IfcSpace", Some("IfcSpatialStructureElement"), false, &["PredefinedType", "ElevationWithFlooring"]),
    ("IfcTypeObject", Some("IfcObjectDefinition"), false, &["ApplicableOccurrence", "HasPropertySets"]),
    ("IfcTypeProduct", Some("IfcTypeObject"), false, &["RepresentationMaps", "Tag"]),
    ("IfcElementType", Some("IfcTypeProduct"), true, &["ElementType"]),
    ("IfcBuildingElementType", Some("IfcElementType"), true, &[]),
    ("IfcWallType", Some("IfcBuildingElementType"), false, &["PredefinedType"]),
    ("IfcRelationship", Some("IfcRoot"), true, &[]),
    ("IfcRelDecomposes", Some("IfcRelationship"), true, &[]),
    ("IfcRelAggregates", Some("IfcRelDecomposes"), false, &["RelatingObject", "RelatedObjects"]),
    ("IfcRelNests", Some("IfcRelDecomposes"), false, &["RelatingObject", "RelatedObjects"]),
    ("IfcRelVoidsElement", Some("IfcRelDecomposes"), false, &["RelatingBuildingElement", "RelatedOpeningElement"]),
    ("IfcRelConnects", Some("IfcRelationship"), true, &[]),
    ("IfcRelContainedInSpatialStructure", Some("IfcRelConnects"), false, &["RelatedElements", "RelatingStructure"]),
    ("IfcRelFillsElement", Some("IfcRelConnects"), false, &["RelatingOpeningElement", "RelatedBuildingElement"]),
    ("IfcRelDefines", Some("IfcRelationship"), true, &[]),
    ("IfcRelDefinesByProperties", Some("IfcRelDefines"), false, &["RelatedObjects", "RelatingPropertyDefinition"]),
    ("IfcRelDefinesByType", Some("IfcRelDefines"), false, &["RelatedObjects", "RelatingType"]),
    ("IfcRelAssociates", Some("IfcRelationship"), true, &["RelatedObjects"]),
    ("IfcRelAssociatesMaterial", Some("IfcRelAssociates"), false, &["RelatingMaterial"]),
    ("IfcRelDeclares", Some("IfcRelationship"), false, &["RelatingContext", "RelatedDefinitions"]),
    ("IfcPropertyDefinition", Some("IfcRoot"), true, &[]),
    ("IfcPropertySetDefinition", Some("IfcPropertyDefinition"), true, &[]),
    ("IfcPropertySet", Some("IfcPropertySetDefinition"), false, &["HasProperties"]),
    ("IfcElementQuantity", Some("IfcPropertySetDefinition"), false, &["MethodOfMeasurement", "Quantities"]),
    ("IfcPropertyTemplateDefinition", Some("IfcPropertyDefinition"), true, &[]),
    (
        "IfcPropertySetTemplate",
        Some("IfcPropertyTemplateDefinition"),
        false,
        &["TemplateType", "ApplicableEntity", "HasPropertyTemplates"],
    ),
    ("IfcPropertyTemplate", Some("IfcPropertyTemplateDefinition"), true, &[]),
    (
        "IfcSimplePropertyTemplate",
        Some("IfcPropertyTemplate"),
        false,
        &[
            "TemplateType",
            "PrimaryMeasureType",
            "SecondaryMeasureType",
            "Enumerators",
            "PrimaryUnit",
            "SecondaryUnit",
            "Expression",
            "AccessState",
        ],
    ),
    // Resources (not rooted)
    ("IfcCartesianPoint", None, false, &["Coordinates"]),
    ("IfcDirection", None, false, &["DirectionRatios"]),
    ("IfcAxis2Placement2D", None, false, &["Location", "RefDirection"]),
    ("IfcAxis2Placement3D", None, false, &["Location", "Axis", "RefDirection"]),
    ("IfcLocalPlacement", None, false, &["PlacementRelTo", "RelativePlacement"]),
    (
        "IfcGeometricRepresentationContext",
        None,
        false,
        &[
            "ContextIdentifier",
            "ContextType",
            "CoordinateSpaceDimension",
            "Precision",
            "WorldCoordinateSystem",
            "TrueNorth",
        ],
    ),
    (
        "IfcGeometricRepresentationSubContext",
        Some("IfcGeometricRepresentationContext"),
        false,
        &["ParentContext", "TargetScale", "TargetView", "UserDefinedTargetView"],
    ),
    (
        "IfcShapeRepresentation",
        None,
        false,
        &["ContextOfItems", "RepresentationIdentifier", "RepresentationType", "Items"],
    ),
    ("IfcProductDefinitionShape", None, false, &["Name", "Description", "Representations"]),
    ("IfcProfileDef", None, true, &["ProfileType", "ProfileName"]),
    ("IfcParameterizedProfileDef", Some("IfcProfileDef"), true, &["Position"]),
    ("IfcRectangleProfileDef", Some("IfcParameterizedProfileDef"), false, &["XDim", "YDim"]),
    ("IfcArbitraryClosedProfileDef", Some("IfcProfileDef"), false, &["OuterCurve"]),
    ("IfcPolyline", None, false, &["Points"]),
    ("IfcExtrudedAreaSolid", None, false, &["SweptArea", "Position", "ExtrudedDirection", "Depth"]),
    ("IfcSIUnit", None, false, &["Dimensions", "UnitType", "Prefix", "Name"]),
    ("IfcConversionBasedUnit", None, false, &["Dimensions", "UnitType", "Name", "ConversionFactor"]),
    ("IfcMeasureWithUnit", None, false, &["ValueComponent", "UnitComponent"]),
    ("IfcUnitAssignment", None, false, &["Units"]),
    (
        "IfcDimensionalExponents",
        None,
        false,
        &[
            "LengthExponent",
            "MassExponent",
            "TimeExponent",
            "ElectricCurrentExponent",
            "ThermodynamicTemperatureExponent",
            "AmountOfSubstanceExponent",
            "LuminousIntensityExponent",
        ],
    ),
    (
        "IfcOwnerHistory",
        None,
        false,
        &[
            "OwningUser",
            "OwningApplication",
            "State",
            "ChangeAction",
            "LastModifiedDate",
            "LastModifyingUser",
            "LastModifyingApplication",
            "CreationDate",
        ],
    ),
    (
        "IfcPerson",
        None,
        false,
        &[
            "Identification",
            "FamilyName",
            "GivenName",
            "MiddleNames",
            "PrefixTitles",
            "SuffixTitles",
            "Roles",
            "Addresses",
        ],
    ),
    ("IfcOrganization", None, false, &["Identification", "Name", "Description", "Roles", "Addresses"]),
    ("IfcPersonAndOrganization", None, false, &["ThePerson", "TheOrganization", "Roles"]),
    (
        "IfcApplication",
        None,
        false,
        &["ApplicationDeveloper", "Version", "ApplicationFullName", "ApplicationIdentifier"],
    ),
    ("IfcProperty", None, true, &["Name", "Description"]),
    ("IfcSimpleProperty", Some("IfcProperty"), true, &[]),
    ("IfcPropertySingleValue", Some("IfcSimpleProperty"), false, &["NominalValue", "Unit"]),
    ("IfcPropertyEnumeratedValue", Some("IfcSimpleProperty"), false, &["EnumerationValues", "EnumerationReference"]),
    ("IfcPhysicalQuantity", None, true, &["Name", "Description"]),
    ("IfcPhysicalSimpleQuantity", Some("IfcPhysicalQuantity"), true, &["Unit"]),
    ("IfcQuantityLength", Some("IfcPhysicalSimpleQuantity"), false, &["LengthValue", "Formula"]),
    ("IfcQuantityArea", Some("IfcPhysicalSimpleQuantity"), false, &["AreaValue", "Formula"]),
    ("IfcQuantityVolume", Some("IfcPhysicalSimpleQuantity"), false, &["VolumeValue", "Formula"]),
    ("IfcQuantityCount", Some("IfcPhysicalSimpleQuantity"), false, &["CountValue", "Formula"]),
    ("IfcMaterial", None, false, &["Name", "Description", "Category"]),
    (
        "IfcLibraryReference",
        None,
        false,
        &["Location", "Identification", "Name", "Description", "Language", "ReferencedLibrary"],
    ),
];

#[derive(Debug)]
pub struct EntityDef {
    /// Mixed-case name as written in the schema (e.g. `IfcWall`).
    pub name: &'static str,
    pub supertype: Option<&'static str>,
    pub is_abstract: bool,
    /// Full attribute list including inherited attributes, in SPF order.
    pub attributes: Vec<&'static str>,
}

fn table() -> &'static HashMap<String, EntityDef> {
    static TABLE: OnceLock<HashMap<String, EntityDef>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let raw: HashMap<&str, &RawDef> = RAW.iter().map(|d| (d.0, d)).collect();
        let mut out = HashMap::new();
        for def in RAW {
            let mut chain = vec![*def];
            let mut cur = def.1;
            while let Some(parent) = cur {
                let p = raw[parent];
                chain.push(*p);
                cur = p.1;
            }
            let attributes = chain.iter().rev().flat_map(|d| d.3.iter().copied()).collect();
            out.insert(
                def.0.to_ascii_uppercase(),
                EntityDef { name: def.0, supertype: def.1, is_abstract: def.2, attributes },
            );
        }
        out
    })
}

/// Looks up a class by name, case-insensitively.
pub fn lookup(type_name: &str) -> Option<&'static EntityDef> {
    table().get(&type_name.to_ascii_uppercase())
}

/// True when `type_name` equals `ancestor` or derives from it.
pub fn is_subtype_of(type_name: &str, ancestor: &str) -> bool {
    let ancestor = ancestor.to_ascii_uppercase();
    let mut cur = type_name.to_ascii_uppercase();
    loop {
        if cur == ancestor {
            return true;
        }
        match table().get(&cur).and_then(|d| d.supertype) {
            Some(parent) => cur = parent.to_ascii_uppercase(),
            None => return false,
        }
    }
}

/// Whether the class derives from IfcRoot; `None` when the class is unknown.
pub fn is_rooted_type(type_name: &str) -> Option<bool> {
    lookup(type_name).map(|_| is_subtype_of(type_name, "IfcRoot"))
}

pub fn attribute_index(type_name: &str, attr: &str) -> Option<usize> {
    lookup(type_name)?.attributes.iter().position(|a| a.eq_ignore_ascii_case(attr))
}

pub fn attribute_name(type_name: &str, index: usize) -> Option<&'static str> {
    lookup(type_name)?.attributes.get(index).copied()
}

/// All known classes, in declaration order.
pub fn all() -> impl Iterator<Item = &'static EntityDef> {
    RAW.iter().map(|d| &table()[&d.0.to_ascii_uppercase()])
}
