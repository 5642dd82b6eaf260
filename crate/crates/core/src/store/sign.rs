//! Presigned grants: HMAC-SHA256 over
//! `method\nbucket\nkey\nversionId\nexpiresAt`, with `expiresAt` in unix
//! seconds and an empty `versionId` for POST or unpinned GET grants.

use std::fmt;

use hmac::{Hmac, Mac};
use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use sha2::Sha256;
use thiserror::Error;

type HmacSha256 = Hmac<Sha256>;

/// Characters escaped inside one path segment.
const SEGMENT: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'_').remove(b'.').remove(b'~');

pub const MAX_TTL_SEC: u64 = 86_400;
pub const EXPIRES_PARAM: &str = "X-Expires";
pub const SIGNATURE_PARAM: &str = "X-Sig";
pub const VERSION_PARAM: &str = "versionId";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Get,
    Post,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Post => "POST",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grant {
    pub method: Method,
    pub bucket: String,
    pub key: String,
    pub version_id: Option<String>,
    /// Unix seconds.
    pub expires_at: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrantError {
    #[error("expired")]
    Expired,
    #[error("bad signature")]
    BadSignature,
    #[error("ttl {0} s outside 1..={MAX_TTL_SEC}")]
    TtlOutOfRange(u64),
}

impl Grant {
    pub fn canonical_string(&self) -> String {
        format!(
            "{}\n{}\n{}\n{}\n{}",
            self.method,
            self.bucket,
            self.key,
            self.version_id.as_deref().unwrap_or(""),
            self.expires_at
        )
    }

    pub fn sign(&self, secret: &[u8]) -> String {
        let mut mac = HmacSha256::new_from_slice(secret).expect("hmac accepts any key length");
        mac.update(self.canonical_string().as_bytes());
        hex::encode(mac.finalize().into_bytes())
    }

    /// Checks the signature (constant time), then expiry against `now`.
    pub fn verify(&self, secret: &[u8], signature: &str, now: u64) -> Result<(), GrantError> {
        let sig = hex::decode(signature).map_err(|_| GrantError::BadSignature)?;
        // Only the canonical lowercase encoding is accepted.
        if hex::encode(&sig) != signature {
            return Err(GrantError::BadSignature);
        }
        let mut mac = HmacSha256::new_from_slice(secret).expect("hmac accepts any key length");
        mac.update(self.canonical_string().as_bytes());
        mac.verify_slice(&sig).map_err(|_| GrantError::BadSignature)?;
        if now > self.expires_at {
            return Err(GrantError::Expired);
        }
        Ok(())
    }
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Percent-encodes each key segment, keeping the `/` separators.
pub fn encode_key(key: &str) -> String {
    key.split('/').map(|seg| utf8_percent_encode(seg, SEGMENT).to_string()).collect::<Vec<_>>().join("/")
}

/// Builds a presigned URL under `base_url` (e.g. `http://127.0.0.1:9100`).
pub fn presign_url(
    base_url: &str,
    secret: &[u8],
    method: Method,
    bucket: &str,
    key: &str,
    version_id: Option<&str>,
    ttl_sec: u64,
) -> Result<String, GrantError> {
    if !(1..=MAX_TTL_SEC).contains(&ttl_sec) {
        return Err(GrantError::TtlOutOfRange(ttl_sec));
    }
    let grant = Grant {
        method,
        bucket: bucket.to_string(),
        key: key.to_string(),
        version_id: version_id.map(str::to_string),
        expires_at: unix_now() + ttl_sec,
    };
    let sig = grant.sign(secret);
    let mut query = url::form_urlencoded::Serializer::new(String::new());
    if let Some(v) = version_id {
        query.append_pair(VERSION_PARAM, v);
    }
    query.append_pair(EXPIRES_PARAM, &grant.expires_at.to_string());
    query.append_pair(SIGNATURE_PARAM, &sig);
    Ok(format!(
        "{}/bucket/{}/{}?{}",
        base_url.trim_end_matches('/'),
        encode_key(bucket),
        encode_key(key),
        query.finish()
    ))
}

/// Bucket, key and optional version named by a presigned (or plain) object URL.
pub fn parse_object_url(url: &str) -> Option<(String, String, Option<String>)> {
    let u = url::Url::parse(url).ok()?;
    let mut segs = u.path_segments()?;
    if segs.next()? != "bucket" {
        return None;
    }
    let decode = |s: &str| percent_decode_str(s).decode_utf8().ok().map(|c| c.into_owned());
    let bucket = decode(segs.next()?)?;
    let key: Vec<String> = segs.map(decode).collect::<Option<_>>()?;
    if bucket.is_empty() || key.is_empty() {
        return None;
    }
    let version = u.query_pairs().find(|(k, _)| k == VERSION_PARAM).map(|(_, v)| v.into_owned());
    Some((bucket, key.join("/"), version))
}
