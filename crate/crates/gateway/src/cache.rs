use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use verirank_core::judge::ChatRequest;
use verirank_core::model::content_digest;

/// Content address of a request.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CacheKey {
    pub digest: String,
}

impl CacheKey {
    /// Covers endpoint, model, messages, temperature and nonce. `max_tokens`
    /// is deliberately excluded.
    pub fn for_chat(endpoint: &str, request: &ChatRequest) -> Self {
        let canonical = json!({
            "kind": "chat",
            "endpoint": endpoint,
            "model": request.model,
            "messages": request.messages,
            "temperature": request.temperature,
            "seed_nonce": request.seed_nonce,
        });
        CacheKey {
            digest: content_digest(canonical.to_string().as_bytes()),
        }
    }

    pub fn for_embedding(endpoint: &str, model: &str, text: &str) -> Self {
        let canonical = json!({ "kind": "embedding", "endpoint": endpoint, "model": model, "input": text });
        CacheKey {
            digest: content_digest(canonical.to_string().as_bytes()),
        }
    }
}

/// One file per key under `dir/<first two hex digits>/<digest>`, written via
/// temp file and rename so concurrent readers never see partial entries.
#[derive(Debug, Clone)]
pub struct DiskCache {
    dir: PathBuf,
}

impl DiskCache {
    pub fn new(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(DiskCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(&key.digest[..2]).join(&key.digest)
    }

    pub fn get(&self, key: &CacheKey) -> Option<String> {
        fs::read_to_string(self.path(key)).ok()
    }

    pub fn put(&self, key: &CacheKey, value: &str) -> io::Result<()> {
        let path = self.path(key);
        let parent = path.parent().expect("cache entries live in a shard directory");
        fs::create_dir_all(parent)?;
        let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
        tmp.write_all(value.as_bytes())?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        fs::read_dir(&self.dir)
            .into_iter()
            .flatten()
            .flatten()
            .filter(|e| e.path().is_dir())
            .map(|e| fs::read_dir(e.path()).map(|d| d.count()).unwrap_or(0))
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use verirank_core::judge::Message;

    fn req() -> ChatRequest {
        ChatRequest {
            model: "m".into(),
            messages: vec![Message::user("hi")],
            temperature: 0.6,
            seed_nonce: "vote-1".into(),
            max_tokens: 16,
        }
    }

    #[test]
    fn key_changes_with_every_field() {
        let base = CacheKey::for_chat("e", &req());
        assert_eq!(base, CacheKey::for_chat("e", &req()));
        let variants = [
            CacheKey::for_chat("e2", &req()),
            CacheKey::for_chat(
                "e",
                &ChatRequest {
                    model: "m2".into(),
                    ..req()
                },
            ),
            CacheKey::for_chat(
                "e",
                &ChatRequest {
                    messages: vec![Message::user("ho")],
                    ..req()
                },
            ),
            CacheKey::for_chat(
                "e",
                &ChatRequest {
                    temperature: 0.7,
                    ..req()
                },
            ),
            CacheKey::for_chat(
                "e",
                &ChatRequest {
                    seed_nonce: "vote-2".into(),
                    ..req()
                },
            ),
        ];
        for v in variants {
            assert_ne!(v, base);
        }
        assert_ne!(
            CacheKey::for_embedding("e", "m", "hi"),
            CacheKey::for_embedding("e", "m", "ho")
        );
    }

    #[test]
    fn round_trip_and_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let cache = DiskCache::new(dir.path().join("c")).unwrap();
        let key = CacheKey::for_chat("e", &req());
        assert_eq!(cache.get(&key), None);
        cache.put(&key, "one").unwrap();
        cache.put(&key, "two").unwrap();
        assert_eq!(cache.get(&key).as_deref(), Some("two"));
        assert_eq!(cache.len(), 1);
    }
}
