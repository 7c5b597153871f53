//! `SKILL.md` documents and the file-backed skill repository.
//!
//! A skill is a single Markdown document: a `---`-delimited frontmatter
//! block carrying `name` and `description`, followed by a free-form body.
//! The canonical writer always emits
//!
//! ```text
//! ---
//! name: <name>
//! description: <description>
//! ---
//! <body>
//! ```
//!
//! and `parse_skill(&serialize_skill(s)) == s` for every valid skill.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DELIMITER: &str = "---";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SkillError {
    #[error("document does not start with a `---` frontmatter block")]
    MissingFrontmatter,
    #[error("frontmatter is missing required field `{0}`")]
    MissingField(&'static str),
    #[error("invalid skill name {0:?}: expected lowercase letters, digits, `-` or `_`")]
    InvalidSlug(String),
    #[error("skill description must not be empty")]
    EmptyDescription,
    #[error("frontmatter line {line}: {reason}")]
    MalformedFrontmatter { line: usize, reason: String },
}

#[derive(Debug, Error)]
pub enum RepoError {
    #[error("duplicate skill name `{name}` ({first} and {second})")]
    DuplicateName {
        name: String,
        first: PathBuf,
        second: PathBuf,
    },
    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    UnwritableFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    ParseError {
        path: PathBuf,
        #[source]
        source: SkillError,
    },
    #[error("duplicate skill name `{0}`")]
    DuplicateSkill(String),
}

/// Returns true when `name` is a valid skill slug.
pub fn is_valid_slug(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_')
}

/// Lowercases and validates a skill name.
pub fn normalize_name(name: &str) -> Result<String, SkillError> {
    let lowered = name.trim().to_lowercase();
    if is_valid_slug(&lowered) {
        Ok(lowered)
    } else {
        Err(SkillError::InvalidSlug(name.to_string()))
    }
}

/// A named unit of procedural knowledge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skill {
    name: String,
    description: String,
    body: String,
}

impl Skill {
    /// Builds a skill, normalizing the name to lowercase.
    pub fn new(
        name: impl AsRef<str>,
        description: impl Into<String>,
        body: impl Into<String>,
    ) -> Result<Self, SkillError> {
        let name = normalize_name(name.as_ref())?;
        let description = description.into();
        if description.trim().is_empty() {
            return Err(SkillError::EmptyDescription);
        }
        Ok(Self {
            name,
            description,
            body: body.into(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub(crate) fn set_description(&mut self, description: String) -> Result<(), SkillError> {
        if description.trim().is_empty() {
            return Err(SkillError::EmptyDescription);
        }
        self.description = description;
        Ok(())
    }

    pub(crate) fn set_body(&mut self, body: String) {
        self.body = body;
    }

    /// Canonical `SKILL.md` rendering.
    pub fn to_markdown(&self) -> String {
        serialize_skill(self)
    }
}

/// Writes the canonical document for `skill`.
pub fn serialize_skill(skill: &Skill) -> String {
    let mut out = String::with_capacity(skill.body.len() + skill.description.len() + 48);
    out.push_str(DELIMITER);
    out.push('\n');
    out.push_str("name: ");
    out.push_str(&skill.name);
    out.push('\n');
    out.push_str("description: ");
    out.push_str(&encode_scalar(&skill.description));
    out.push('\n');
    out.push_str(DELIMITER);
    out.push('\n');
    out.push_str(&skill.body);
    out
}

/// Parses a `SKILL.md` document.
///
/// Unknown frontmatter keys are ignored. The body is everything after the
/// closing delimiter line, byte for byte.
pub fn parse_skill(text: &str) -> Result<Skill, SkillError> {
    let rest = text
        .strip_prefix("---\n")
        .or_else(|| (text == DELIMITER).then_some(""))
        .ok_or(SkillError::MissingFrontmatter)?;

    let mut name = None;
    let mut description = None;
    let mut offset = 0;
    let mut closed = false;
    for (idx, line) in rest.split_inclusive('\n').enumerate() {
        offset += line.len();
        let content = line.strip_suffix('\n').unwrap_or(line);
        if content == DELIMITER {
            closed = true;
            break;
        }
        // Line numbers are 1-based and count the opening delimiter.
        let line_no = idx + 2;
        if content.trim().is_empty() || content.trim_start().starts_with('#') {
            continue;
        }
        let (key, value) = content
            .split_once(':')
            .ok_or_else(|| SkillError::MalformedFrontmatter {
                line: line_no,
                reason: "expected `key: value`".into(),
            })?;
        let value = decode_scalar(value.trim()).map_err(|reason| {
            SkillError::MalformedFrontmatter {
                line: line_no,
                reason,
            }
        })?;
        match key.trim() {
            "name" => name = Some(value),
            "description" => description = Some(value),
            _ => {}
        }
    }
    if !closed {
        return Err(SkillError::MissingFrontmatter);
    }

    let name = name.ok_or(SkillError::MissingField("name"))?;
    let description = description.ok_or(SkillError::MissingField("description"))?;
    Skill::new(name, description, &rest[offset..])
}

// Plain scalars are written bare; anything YAML would reinterpret is written
// as a double-quoted scalar, which shares its escape syntax with JSON.
fn encode_scalar(value: &str) -> String {
    if needs_quoting(value) {
        serde_json::to_string(value).expect("string serialization is infallible")
    } else {
        value.to_string()
    }
}

fn needs_quoting(value: &str) -> bool {
    const LEADING: &[char] = &[
        '"', '\'', '[', ']', '{', '}', '>', '|', '*', '&', '!', '%', '@', '`', '#', ',', '?', '-',
        ':',
    ];
    value.is_empty()
        || value.trim() != value
        || value.starts_with(LEADING)
        || value.contains(": ")
        || value.contains(" #")
        || value.ends_with(':')
        || value.chars().any(|c| c.is_control())
}

fn decode_scalar(raw: &str) -> Result<String, String> {
    if raw.starts_with('"') {
        serde_json::from_str::<String>(raw).map_err(|e| format!("bad quoted scalar: {e}"))
    } else if let Some(inner) = raw.strip_prefix('\'') {
        inner
            .strip_suffix('\'')
            .map(|s| s.replace("''", "'"))
            .ok_or_else(|| "unterminated single-quoted scalar".to_string())
    } else {
        Ok(raw.to_string())
    }
}

/// Counts tokens for the repository- and context-length terms of the reward.
pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// Whitespace-delimited token count.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokens;

impl TokenCounter for WhitespaceTokens {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

/// An immutable snapshot of the skill collection.
///
/// Skills are kept in name order; `revision` counts applied operation
/// batches since the snapshot was created or loaded.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillRepo {
    skills: BTreeMap<String, Skill>,
    revision: u64,
}

impl SkillRepo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_skills<I>(skills: I) -> Result<Self, RepoError>
    where
        I: IntoIterator<Item = Skill>,
    {
        let mut map = BTreeMap::new();
        for skill in skills {
            let name = skill.name.clone();
            if map.insert(name.clone(), skill).is_some() {
                return Err(RepoError::DuplicateSkill(name));
            }
        }
        Ok(Self {
            skills: map,
            revision: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn get(&self, name: &str) -> Option<&Skill> {
        self.skills.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.skills.contains_key(name)
    }

    /// Skills in ascending name order.
    pub fn iter(&self) -> impl Iterator<Item = &Skill> {
        self.skills.values()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.skills.keys().map(String::as_str)
    }

    pub(crate) fn get_mut(&mut self, name: &str) -> Option<&mut Skill> {
        self.skills.get_mut(name)
    }

    pub(crate) fn put(&mut self, skill: Skill) -> Option<Skill> {
        self.skills.insert(skill.name.clone(), skill)
    }

    pub(crate) fn remove(&mut self, name: &str) -> Option<Skill> {
        self.skills.remove(name)
    }

    pub(crate) fn bump_revision(&mut self) {
        self.revision += 1;
    }

    /// Same skills with the revision counter reset to zero.
    pub fn without_revision(&self) -> Self {
        Self {
            skills: self.skills.clone(),
            revision: 0,
        }
    }
}

/// Loads every `*.md` file in `dir`, in file-name order.
pub fn load_repo(dir: impl AsRef<Path>) -> Result<SkillRepo, RepoError> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|source| RepoError::UnreadableFile {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| RepoError::UnreadableFile {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = entry.path();
        if path.is_file() && path.extension().is_some_and(|ext| ext == "md") {
            paths.push(path);
        }
    }
    paths.sort();

    let mut origin: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut repo = SkillRepo::new();
    for path in paths {
        let text = fs::read_to_string(&path).map_err(|source| RepoError::UnreadableFile {
            path: path.clone(),
            source,
        })?;
        let skill = parse_skill(&text).map_err(|source| RepoError::ParseError {
            path: path.clone(),
            source,
        })?;
        if let Some(first) = origin.get(skill.name()) {
            return Err(RepoError::DuplicateName {
                name: skill.name().to_string(),
                first: first.clone(),
                second: path,
            });
        }
        origin.insert(skill.name().to_string(), path);
        repo.put(skill);
    }
    Ok(repo)
}

/// Writes one `<name>.md` per skill and removes any other `*.md` file in
/// `dir`, so the directory mirrors the snapshot exactly.
pub fn save_repo(repo: &SkillRepo, dir: impl AsRef<Path>) -> Result<(), RepoError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| RepoError::UnwritableFile {
        path: dir.to_path_buf(),
        source,
    })?;
    if let Ok(entries) = fs::read_dir(dir) {
        for entry in entries.flatten() {
            let path = entry.path();
            let stale = path.extension().is_some_and(|ext| ext == "md")
                && path
                    .file_stem()
                    .and_then(|stem| stem.to_str())
                    .is_none_or(|stem| !repo.contains(stem));
            if stale && path.is_file() {
                fs::remove_file(&path)
                    .map_err(|source| RepoError::UnwritableFile { path, source })?;
            }
        }
    }
    for skill in repo.iter() {
        let path = dir.join(format!("{}.md", skill.name()));
        fs::write(&path, serialize_skill(skill))
            .map_err(|source| RepoError::UnwritableFile { path, source })?;
    }
    Ok(())
}

/// Total token length of the repository: the sum over skills of the token
/// count of each canonical document.
pub fn repo_token_length(repo: &SkillRepo, counter: &dyn TokenCounter) -> usize {
    repo.iter()
        .map(|skill| counter.count(&serialize_skill(skill)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_document() {
        let skill =
            parse_skill("---\nname: fridge-search\ndescription: search cold storage\n---\nOpen the fridge first.")
                .unwrap();
        assert_eq!(skill.name(), "fridge-search");
        assert_eq!(skill.description(), "search cold storage");
        assert_eq!(skill.body(), "Open the fridge first.");
    }

    #[test]
    fn rejects_missing_delimiters() {
        assert_eq!(parse_skill("No delimiters"), Err(SkillError::MissingFrontmatter));
        assert_eq!(
            parse_skill("---\nname: a\ndescription: d\n"),
            Err(SkillError::MissingFrontmatter)
        );
    }

    #[test]
    fn rejects_bad_slug() {
        let err = parse_skill("---\nname: Bad Name!\ndescription: d\n---\n").unwrap_err();
        assert!(matches!(err, SkillError::InvalidSlug(_)));
    }

    #[test]
    fn reports_missing_fields() {
        assert_eq!(
            parse_skill("---\ndescription: d\n---\nbody"),
            Err(SkillError::MissingField("name"))
        );
        assert_eq!(
            parse_skill("---\nname: a\n---\nbody"),
            Err(SkillError::MissingField("description"))
        );
    }

    #[test]
    fn names_are_lowercased_on_ingest() {
        let skill = parse_skill("---\nname: Heat-Apple\ndescription: d\n---\n").unwrap();
        assert_eq!(skill.name(), "heat-apple");
    }

    #[test]
    fn canonical_form() {
        let skill = Skill::new("a", "d", "b").unwrap();
        assert_eq!(serialize_skill(&skill), "---\nname: a\ndescription: d\n---\nb");
    }

    #[test]
    fn body_with_delimiter_inside_fence_round_trips() {
        let body = "Steps:\n```yaml\n---\nkey: value\n---\n```\n---\ntrailing\n";
        let skill = Skill::new("fenced", "has delimiters", body).unwrap();
        let text = serialize_skill(&skill);
        let parsed = parse_skill(&text).unwrap();
        assert_eq!(parsed, skill);
        assert_eq!(serialize_skill(&parsed), text);
    }

    #[test]
    fn awkward_descriptions_are_quoted() {
        for desc in ["key: value", " padded", "\"quoted\"", "line\nbreak", "- dash", "ends:"] {
            let skill = Skill::new("x", desc, "").unwrap();
            let text = serialize_skill(&skill);
            assert_eq!(parse_skill(&text).unwrap(), skill, "{text}");
        }
    }

    #[test]
    fn single_quoted_scalars_are_accepted() {
        let skill = parse_skill("---\nname: 'a'\ndescription: 'it''s fine'\n---\n").unwrap();
        assert_eq!(skill.description(), "it's fine");
    }

    #[test]
    fn empty_body_round_trips() {
        let skill = Skill::new("a", "d", "").unwrap();
        assert_eq!(parse_skill(&serialize_skill(&skill)).unwrap(), skill);
    }

    #[test]
    fn token_length_of_fixture() {
        // ---, name:, a-skill, description:, use, when, heating, ---, Heat, the, item, first.
        let skill = Skill::new("a-skill", "use when heating", "Heat the item first.").unwrap();
        let repo = SkillRepo::from_skills([skill]).unwrap();
        assert_eq!(repo_token_length(&repo, &WhitespaceTokens), 12);
        assert_eq!(repo_token_length(&SkillRepo::new(), &WhitespaceTokens), 0);
    }

    #[test]
    fn duplicate_names_rejected_in_memory() {
        let a = Skill::new("a", "d", "").unwrap();
        assert!(matches!(
            SkillRepo::from_skills([a.clone(), a]),
            Err(RepoError::DuplicateSkill(_))
        ));
    }
}
