use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::{Mutex, RwLock};

use crate::error::LlmError;
use crate::gateway::{Backend, ChatResponse, RenderedPrompt, TokenUsage};

/// Stable 64-bit FNV-1a hash of a rendered prompt, as 16 lowercase hex digits.
pub fn prompt_hash(text: &str) -> String {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let h = text.as_bytes().iter().fold(OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(PRIME));
    format!("{h:016x}")
}

/// How a fixture entry selects prompts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FixtureKey {
    /// Exact rendered-prompt hash.
    Hash(String),
    /// Rendered prompt contains this substring. Longest needle wins.
    Contains(String),
    /// Any prompt for the template.
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockEntry {
    pub template_id: String,
    pub key: FixtureKey,
    pub response: String,
}

impl MockEntry {
    /// Parses a fixture entry file: `# template: <id>`, then
    /// `# prompt-hash: <hex|*>` or `# prompt-contains: <text>`, then the body.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.splitn(3, '\n');
        let first = lines.next().unwrap_or_default().trim_end_matches('\r');
        let second = lines.next().unwrap_or_default().trim_end_matches('\r');
        let body = lines.next().unwrap_or_default();
        let template_id = first
            .strip_prefix("# template:")
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or("first line must be `# template: <id>`")?
            .to_string();
        let key = if let Some(h) = second.strip_prefix("# prompt-hash:") {
            match h.trim() {
                "*" => FixtureKey::Any,
                h if h.len() == 16 && h.chars().all(|c| c.is_ascii_hexdigit()) => {
                    FixtureKey::Hash(h.to_ascii_lowercase())
                }
                other => return Err(format!("bad prompt-hash `{other}`")),
            }
        } else if let Some(needle) = second.strip_prefix("# prompt-contains:") {
            let needle = needle.trim();
            if needle.is_empty() {
                return Err("empty prompt-contains".into());
            }
            FixtureKey::Contains(needle.to_string())
        } else {
            return Err("second line must be `# prompt-hash:` or `# prompt-contains:`".into());
        };
        let response = body.strip_suffix('\n').unwrap_or(body);
        let response = response.strip_suffix('\r').unwrap_or(response).to_string();
        Ok(Self { template_id, key, response })
    }

    pub fn render(&self) -> String {
        let key = match &self.key {
            FixtureKey::Hash(h) => format!("# prompt-hash: {h}"),
            FixtureKey::Contains(n) => format!("# prompt-contains: {n}"),
            FixtureKey::Any => "# prompt-hash: *".to_string(),
        };
        format!("# template: {}\n{key}\n{}\n", self.template_id, self.response)
    }
}

#[derive(Debug, Default)]
struct Fixtures {
    exact: BTreeMap<(String, String), String>,
    contains: BTreeMap<String, Vec<(String, String)>>,
    any: BTreeMap<String, String>,
}

/// Deterministic scripted backend.
///
/// Responses are looked up by template id, first by exact prompt hash, then
/// by the longest matching `contains` needle, then by a per-template
/// wildcard. Every call is recorded for inspection.
#[derive(Debug, Default)]
pub struct MockBackend {
    fixtures: RwLock<Fixtures>,
    calls: Mutex<Vec<RenderedPrompt>>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every regular file in `dir` (sorted by name) as a fixture entry.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, LlmError> {
        let mock = Self::new();
        mock.load_dir(dir)?;
        Ok(mock)
    }

    pub fn load_dir(&self, dir: impl AsRef<Path>) -> Result<usize, LlmError> {
        let dir = dir.as_ref();
        let mut paths = Vec::new();
        collect_files(dir, &mut paths)
            .map_err(|e| LlmError::Unavailable(format!("reading fixtures {}: {e}", dir.display())))?;
        paths.sort();
        for path in &paths {
            let text = fs::read_to_string(path)
                .map_err(|e| LlmError::Unavailable(format!("reading {}: {e}", path.display())))?;
            let entry = MockEntry::parse(&text)
                .map_err(|e| LlmError::Unavailable(format!("fixture {}: {e}", path.display())))?;
            self.add(entry);
        }
        Ok(paths.len())
    }

    pub fn add(&self, entry: MockEntry) {
        let mut fx = self.fixtures.write().expect("fixture lock");
        match entry.key {
            FixtureKey::Hash(h) => {
                fx.exact.insert((entry.template_id, h), entry.response);
            }
            FixtureKey::Contains(n) => {
                let list = fx.contains.entry(entry.template_id).or_default();
                list.retain(|(needle, _)| needle != &n);
                list.push((n, entry.response));
                // Longest needle first; stable for equal lengths.
                list.sort_by_key(|(needle, _)| std::cmp::Reverse(needle.len()));
            }
            FixtureKey::Any => {
                fx.any.insert(entry.template_id, entry.response);
            }
        }
    }

    pub fn script_prompt(&self, template_id: &str, rendered_prompt: &str, response: &str) {
        self.add(MockEntry {
            template_id: template_id.into(),
            key: FixtureKey::Hash(prompt_hash(rendered_prompt)),
            response: response.into(),
        });
    }

    pub fn script_contains(&self, template_id: &str, needle: &str, response: &str) {
        self.add(MockEntry {
            template_id: template_id.into(),
            key: FixtureKey::Contains(needle.into()),
            response: response.into(),
        });
    }

    pub fn script_any(&self, template_id: &str, response: &str) {
        self.add(MockEntry { template_id: template_id.into(), key: FixtureKey::Any, response: response.into() });
    }

    pub fn calls(&self) -> Vec<RenderedPrompt> {
        self.calls.lock().expect("call log").clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().expect("call log").len()
    }

    pub fn calls_for(&self, template_id: &str) -> Vec<RenderedPrompt> {
        self.calls().into_iter().filter(|c| c.template_id == template_id).collect()
    }

    pub fn clear_calls(&self) {
        self.calls.lock().expect("call log").clear();
    }

    fn lookup(&self, template_id: &str, text: &str) -> Option<String> {
        let fx = self.fixtures.read().expect("fixture lock");
        let hash = prompt_hash(text);
        if let Some(r) = fx.exact.get(&(template_id.to_string(), hash)) {
            return Some(r.clone());
        }
        if let Some(list) = fx.contains.get(template_id) {
            if let Some((_, r)) = list.iter().find(|(needle, _)| text.contains(needle.as_str())) {
                return Some(r.clone());
            }
        }
        fx.any.get(template_id).cloned()
    }
}

fn collect_files(dir: &Path, out: &mut Vec<std::path::PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        let name = entry.file_name();
        if name.to_string_lossy().starts_with('.') {
            continue;
        }
        if entry.file_type()?.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

impl Backend for MockBackend {
    fn complete(&self, prompt: &RenderedPrompt) -> Result<ChatResponse, LlmError> {
        self.calls.lock().expect("call log").push(prompt.clone());
        let text = self.lookup(&prompt.template_id, &prompt.text).ok_or_else(|| LlmError::FixtureMissing {
            template_id: prompt.template_id.clone(),
            hash: prompt_hash(&prompt.text),
        })?;
        Ok(ChatResponse {
            token_usage: TokenUsage {
                prompt: prompt.text.split_whitespace().count() as u32,
                completion: text.split_whitespace().count() as u32,
            },
            text,
            confidence: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prompt(template: &str, text: &str) -> RenderedPrompt {
        RenderedPrompt {
            template_id: template.into(),
            text: text.into(),
            history: vec![],
            max_tokens: 16,
            temperature: 0.0,
        }
    }

    #[test]
    fn hash_is_stable() {
        // FNV-1a reference vectors.
        assert_eq!(prompt_hash(""), "cbf29ce484222325");
        assert_eq!(prompt_hash("a"), "af63dc4c8601ec8c");
        assert_eq!(prompt_hash("foobar"), "85944171f73967e8");
    }

    #[test]
    fn parse_entry_file() {
        let e = MockEntry::parse("# template: intent_detect\n# prompt-hash: 00000000DEADBEEF\nagent: chat\n").unwrap();
        assert_eq!(e.template_id, "intent_detect");
        assert_eq!(e.key, FixtureKey::Hash("00000000deadbeef".into()));
        assert_eq!(e.response, "agent: chat");
        let again = MockEntry::parse(&e.render()).unwrap();
        assert_eq!(again, e);
    }

    #[test]
    fn parse_rejects_bad_headers() {
        assert!(MockEntry::parse("template: x\n# prompt-hash: *\n").is_err());
        assert!(MockEntry::parse("# template: x\n# prompt-hash: 12\n").is_err());
        assert!(MockEntry::parse("# template: x\nbody\n").is_err());
    }

    #[test]
    fn lookup_precedence() {
        let m = MockBackend::new();
        m.script_any("t", "wildcard");
        m.script_contains("t", "glitch", "short");
        m.script_contains("t", "clock glitch", "long");
        m.script_prompt("t", "exact clock glitch", "exact");
        assert_eq!(m.complete(&prompt("t", "exact clock glitch")).unwrap().text, "exact");
        assert_eq!(m.complete(&prompt("t", "a clock glitch")).unwrap().text, "long");
        assert_eq!(m.complete(&prompt("t", "glitch")).unwrap().text, "short");
        assert_eq!(m.complete(&prompt("t", "other")).unwrap().text, "wildcard");
        assert!(matches!(m.complete(&prompt("u", "other")), Err(LlmError::FixtureMissing { .. })));
        assert_eq!(m.call_count(), 5);
    }

    #[test]
    fn loads_directory() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.txt"), "# template: t\n# prompt-contains: fuzz\nfuzzing answer\n").unwrap();
        fs::create_dir(dir.path().join("sub")).unwrap();
        fs::write(dir.path().join("sub/b.txt"), "# template: t\n# prompt-hash: *\nfallback\n").unwrap();
        let m = MockBackend::from_dir(dir.path()).unwrap();
        assert_eq!(m.complete(&prompt("t", "hardware fuzzing")).unwrap().text, "fuzzing answer");
        assert_eq!(m.complete(&prompt("t", "x")).unwrap().text, "fallback");
    }
}
