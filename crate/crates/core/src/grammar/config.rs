use std::fmt;

use regex::Regex;
use thiserror::Error;

use crate::metamodel::PrimitiveKind;

/// Name pattern where `*` matches any sequence, including the empty one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Glob(String);

impl Glob {
    pub fn new(pattern: &str) -> Result<Self, String> {
        if pattern.is_empty() {
            return Err("empty glob".into());
        }
        if let Some(bad) = pattern.chars().find(|c| !(c.is_ascii_alphanumeric() || *c == '_' || *c == '*')) {
            return Err(format!("malformed glob `{pattern}`: unexpected `{bad}`"));
        }
        Ok(Glob(pattern.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn matches(&self, name: &str) -> bool {
        let pat = self.0.as_bytes();
        let text = name.as_bytes();
        // Greedy wildcard match with single backtrack point.
        let (mut p, mut t) = (0, 0);
        let mut star: Option<(usize, usize)> = None;
        while t < text.len() {
            if p < pat.len() && pat[p] == b'*' {
                star = Some((p, t));
                p += 1;
            } else if p < pat.len() && pat[p] == text[t] {
                p += 1;
                t += 1;
            } else if let Some((sp, st)) = star {
                p = sp + 1;
                t = st + 1;
                star = Some((sp, st + 1));
            } else {
                return false;
            }
        }
        pat[p..].iter().all(|&c| c == b'*')
    }
}

impl fmt::Display for Glob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AdaptationDirective {
    /// Defines the terminals of every kind matched by the glob. Without a
    /// pattern the built-in pattern of each kind is used.
    DefineTerminal { kinds: Glob, pattern: Option<String> },
    HoistShortName { classes: Glob },
    UnfoldContainment { classes: Glob, members: Glob },
    OptionalBody { classes: Glob },
    RemoveAttributeKeyword { classes: Glob, members: Glob },
}

impl fmt::Display for AdaptationDirective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdaptationDirective::DefineTerminal { kinds, pattern: None } => {
                write!(f, "define-terminal {kinds}")
            }
            AdaptationDirective::DefineTerminal { kinds, pattern: Some(p) } => {
                write!(f, "define-terminal {kinds} /{}/", p.replace('/', "\\/"))
            }
            AdaptationDirective::HoistShortName { classes } => write!(f, "hoist-short-name {classes}"),
            AdaptationDirective::UnfoldContainment { classes, members } => {
                write!(f, "unfold-containment {classes} {members}")
            }
            AdaptationDirective::OptionalBody { classes } => write!(f, "optional-body {classes}"),
            AdaptationDirective::RemoveAttributeKeyword { classes, members } => {
                write!(f, "remove-attribute-keyword {classes} {members}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AdaptationConfig {
    pub directives: Vec<AdaptationDirective>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("config line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

/// Parses the line-oriented adaptation config format. Blank lines and lines
/// starting with `#` are ignored; trailing `# ...` comments are allowed.
pub fn parse_config(text: &str) -> Result<AdaptationConfig, ConfigError> {
    let mut directives = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| ConfigError { line, message };
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (name, rest) = trimmed.split_once(char::is_whitespace).unwrap_or((trimmed, ""));
        let rest = rest.trim();

        if name == "define-terminal" {
            directives.push(parse_define_terminal(rest).map_err(err)?);
            continue;
        }

        let args: Vec<&str> = rest
            .split_whitespace()
            .take_while(|t| !t.starts_with('#'))
            .collect();
        let arity = match name {
            "hoist-short-name" | "optional-body" => 1,
            "unfold-containment" | "remove-attribute-keyword" => 2,
            other => return Err(err(format!("unknown directive `{other}`"))),
        };
        if args.len() != arity {
            return Err(err(format!("`{name}` takes {arity} argument(s), got {}", args.len())));
        }
        let globs = args
            .iter()
            .map(|a| Glob::new(a))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let mut globs = globs.into_iter();
        let mut next = || globs.next().expect("arity checked");
        directives.push(match name {
            "hoist-short-name" => AdaptationDirective::HoistShortName { classes: next() },
            "optional-body" => AdaptationDirective::OptionalBody { classes: next() },
            "unfold-containment" => {
                AdaptationDirective::UnfoldContainment { classes: next(), members: next() }
            }
            _ => AdaptationDirective::RemoveAttributeKeyword { classes: next(), members: next() },
        });
    }
    Ok(AdaptationConfig { directives })
}

fn parse_define_terminal(rest: &str) -> Result<AdaptationDirective, String> {
    let (kind_arg, tail) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
    if kind_arg.is_empty() {
        return Err("`define-terminal` needs a terminal kind".into());
    }
    let kinds = Glob::new(kind_arg)?;
    if !PrimitiveKind::ALL.iter().any(|k| kinds.matches(k.name())) {
        return Err(format!("`{kind_arg}` matches no terminal kind"));
    }
    let tail = tail.trim();
    if tail.is_empty() || tail.starts_with('#') {
        return Ok(AdaptationDirective::DefineTerminal { kinds, pattern: None });
    }
    let body = tail
        .strip_prefix('/')
        .ok_or_else(|| format!("pattern must be written as /regex/, got `{tail}`"))?;
    let close = last_unescaped_slash(body).ok_or("unterminated pattern")?;
    let after = body[close + 1..].trim();
    if !(after.is_empty() || after.starts_with('#')) {
        return Err(format!("unexpected `{after}` after pattern"));
    }
    let pattern = body[..close].replace("\\/", "/");
    if pattern.is_empty() {
        return Err("empty pattern".into());
    }
    Regex::new(&pattern).map_err(|e| format!("invalid pattern: {e}"))?;
    Ok(AdaptationDirective::DefineTerminal { kinds, pattern: Some(pattern) })
}

fn last_unescaped_slash(s: &str) -> Option<usize> {
    let bytes = s.as_bytes();
    (0..bytes.len()).rev().find(|&i| {
        bytes[i] == b'/' && bytes[..i].iter().rev().take_while(|&&b| b == b'\\').count() % 2 == 0
    })
}
