//! Command-line front end. [`run`] is the whole program minus process
//! plumbing, so tests can drive it with in-memory streams.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use similar::TextDiff;

use crate::assist::{complete, AssistDocument, ProposalKind};
use crate::diagnostic::{has_errors, Diagnostic};
use crate::grammar::{adapt_grammar, emit_grammar, generate_grammar, parse_config, read_grammar, Grammar};
use crate::metamodel::{load_metamodel, Metamodel, MetamodelError};
use crate::model::{resolve, ModelElement, ReferenceCache};
use crate::textsyntax::Syntax;
use crate::xmlio::{from_eaxml, to_eaxml, XmlError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExitStatus(pub i32);

impl ExitStatus {
    pub const SUCCESS: ExitStatus = ExitStatus(0);
    /// At least one error diagnostic.
    pub const DIAGNOSTICS: ExitStatus = ExitStatus(1);
    /// Usage, I/O or configuration problem.
    pub const USAGE: ExitStatus = ExitStatus(2);
}

#[derive(Debug, Parser)]
#[command(name = "blendtext", version, about = "Textual syntax toolchain for class-based metamodels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct LanguageArgs {
    /// Metamodel file (Ecore XMI subset).
    #[arg(long)]
    metamodel: PathBuf,
    /// Adaptation config; the built-in default config when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reads the adapted grammar from this file if it exists, otherwise
    /// writes it there.
    #[arg(long)]
    grammar_cache: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the grammar generated from a metamodel.
    GenGrammar {
        #[arg(long)]
        metamodel: PathBuf,
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Write the generated grammar after applying an adaptation config.
    Adapt {
        #[arg(long)]
        metamodel: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Parse and resolve a model, printing diagnostics.
    Check {
        model: PathBuf,
        #[command(flatten)]
        lang: LanguageArgs,
    },
    /// Convert a textual model to XML.
    ToXml {
        model: PathBuf,
        #[command(flatten)]
        lang: LanguageArgs,
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Convert an XML model to canonical text.
    ToText {
        xml: PathBuf,
        #[command(flatten)]
        lang: LanguageArgs,
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Print a model in canonical layout.
    Format {
        model: PathBuf,
        #[command(flatten)]
        lang: LanguageArgs,
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// List completion proposals at a position.
    Complete {
        model: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        line: u64,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        col: u64,
        #[command(flatten)]
        lang: LanguageArgs,
    },
    /// Check that text survives the trip through XML unchanged.
    RoundtripCheck {
        model: PathBuf,
        #[command(flatten)]
        lang: LanguageArgs,
    },
}

/// A failure that ends a command early with the given status.
struct Failure(ExitStatus);

type CmdResult = Result<ExitStatus, Failure>;

struct Ctx<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    xml_hook: Option<&'a dyn Fn(String) -> String>,
}

impl Ctx<'_> {
    fn fail(&mut self, path: &Path, line: usize, column: usize, message: impl std::fmt::Display) -> Failure {
        let _ = writeln!(self.err, "{}:{line}:{column}: error: {message}", path.display());
        Failure(ExitStatus::USAGE)
    }

    fn report(&mut self, path: &Path, diagnostics: &[Diagnostic]) {
        for d in diagnostics {
            let _ = writeln!(self.err, "{}", d.render(&path.display().to_string()));
        }
    }

    fn read(&mut self, path: &Path) -> Result<String, Failure> {
        fs::read_to_string(path).map_err(|e| self.fail(path, 1, 1, e))
    }

    /// Writes to `-o` atomically, or to stdout without it.
    fn emit(&mut self, target: Option<&Path>, text: &str) -> Result<(), Failure> {
        match target {
            None => self.out.write_all(text.as_bytes()).map_err(|_| Failure(ExitStatus::USAGE)),
            Some(path) => write_atomic(path, text).map_err(|e| self.fail(path, 1, 1, e)),
        }
    }

    fn metamodel(&mut self, path: &Path) -> Result<Metamodel, Failure> {
        let text = self.read(path)?;
        load_metamodel(&text).map_err(|e| match e {
            MetamodelError::Syntax { line, column, message } => self.fail(path, line, column, message),
            other => self.fail(path, 1, 1, other),
        })
    }

    fn adapted(&mut self, mm: &Metamodel, config: Option<&Path>) -> Result<(Grammar, Vec<String>, Vec<String>), Failure> {
        let (cfg_text, cfg_path) = match config {
            Some(p) => (self.read(p)?, p.to_path_buf()),
            None => (crate::DEFAULT_CONFIG.to_string(), PathBuf::from("<default config>")),
        };
        let cfg = parse_config(&cfg_text).map_err(|e| self.fail(&cfg_path, e.line, 1, e.message))?;
        let generated = generate_grammar(mm).map_err(|e| self.fail(&cfg_path, 1, 1, e))?;
        let (g, report) = adapt_grammar(&generated, &cfg).map_err(|e| self.fail(&cfg_path, 1, 1, e))?;
        let applied = report
            .outcomes
            .iter()
            .map(|o| {
                format!("applied: {} ({} match{})", o.directive, o.matches, if o.matches == 1 { "" } else { "es" })
            })
            .collect();
        let warnings = report
            .warnings()
            .into_iter()
            .map(|w| format!("{}:1:1: warning: {w}", cfg_path.display()))
            .collect();
        Ok((g, applied, warnings))
    }

    fn language(&mut self, lang: &LanguageArgs) -> Result<(Metamodel, Grammar), Failure> {
        let mm = self.metamodel(&lang.metamodel)?;
        if let Some(cache) = &lang.grammar_cache {
            if cache.exists() {
                let text = self.read(cache)?;
                let g = read_grammar(&text).map_err(|e| self.fail(cache, 1, 1, e))?;
                return Ok((mm, g));
            }
        }
        let (g, _, warnings) = self.adapted(&mm, lang.config.as_deref())?;
        for w in warnings {
            let _ = writeln!(self.err, "{w}");
        }
        if let Some(cache) = &lang.grammar_cache {
            write_atomic(cache, &emit_grammar(&g)).map_err(|e| self.fail(cache, 1, 1, e))?;
        }
        Ok((mm, g))
    }

    fn syntax<'s>(&mut self, lang: &LanguageArgs, g: &'s Grammar, mm: &'s Metamodel) -> Result<Syntax<'s>, Failure> {
        let path = lang.config.clone().unwrap_or_else(|| PathBuf::from("<default config>"));
        Syntax::new(g, mm).map_err(|e| self.fail(&path, 1, 1, e))
    }

    /// Parses a model file; error diagnostics end the command with status 1.
    fn parse_file(&mut self, path: &Path, syntax: &Syntax<'_>) -> Result<(String, ModelElement), Failure> {
        let text = self.read(path)?;
        let parsed = syntax.parse(&text);
        self.report(path, &parsed.diagnostics);
        match parsed.root {
            Some(root) if !has_errors(&parsed.diagnostics) => Ok((text, root)),
            _ => Err(Failure(ExitStatus::DIAGNOSTICS)),
        }
    }

    fn xml_error(&mut self, path: &Path, e: XmlError) -> Failure {
        match e {
            XmlError::Syntax { line, column, message } => {
                let _ = writeln!(self.err, "{}:{line}:{column}: error: {message}", path.display());
            }
            other => {
                let _ = writeln!(self.err, "{}:1:1: error: {other}", path.display());
            }
        }
        Failure(ExitStatus::DIAGNOSTICS)
    }

    fn dispatch(&mut self, command: Command) -> CmdResult {
        match command {
            Command::GenGrammar { metamodel, o } => {
                let mm = self.metamodel(&metamodel)?;
                let g = generate_grammar(&mm).map_err(|e| self.fail(&metamodel, 1, 1, e))?;
                self.emit(o.as_deref(), &emit_grammar(&g))?;
                Ok(ExitStatus::SUCCESS)
            }
            Command::Adapt { metamodel, config, o } => {
                let mm = self.metamodel(&metamodel)?;
                let (g, applied, warnings) = self.adapted(&mm, config.as_deref())?;
                self.emit(o.as_deref(), &emit_grammar(&g))?;
                for line in applied {
                    let stream: &mut dyn Write = if o.is_some() { self.out } else { self.err };
                    let _ = writeln!(stream, "{line}");
                }
                for w in warnings {
                    let _ = writeln!(self.err, "{w}");
                }
                Ok(ExitStatus::SUCCESS)
            }
            Command::Check { model, lang } => {
                let (mm, g) = self.language(&lang)?;
                let syntax = self.syntax(&lang, &g, &mm)?;
                let text = self.read(&model)?;
                let parsed = syntax.parse(&text);
                let mut diagnostics = parsed.diagnostics;
                if let Some(mut root) = parsed.root {
                    diagnostics.extend(resolve(&mut root, &mm));
                }
                for d in &diagnostics {
                    let _ = writeln!(self.out, "{}", d.render(&model.display().to_string()));
                }
                Ok(if has_errors(&diagnostics) { ExitStatus::DIAGNOSTICS } else { ExitStatus::SUCCESS })
            }
            Command::ToXml { model, lang, o } => {
                let (mm, g) = self.language(&lang)?;
                let syntax = self.syntax(&lang, &g, &mm)?;
                let (_, root) = self.parse_file(&model, &syntax)?;
                let xml = to_eaxml(&root, &mm).map_err(|e| self.xml_error(&model, e))?;
                self.emit(o.as_deref(), &xml)?;
                Ok(ExitStatus::SUCCESS)
            }
            Command::ToText { xml, lang, o } => {
                let (mm, g) = self.language(&lang)?;
                let text = self.read(&xml)?;
                let (root, diagnostics) = from_eaxml(&text, &mm).map_err(|e| self.xml_error(&xml, e))?;
                self.report(&xml, &diagnostics);
                let formatted = crate::textsyntax::format_model(&root, &g).map_err(|e| {
                    let _ = writeln!(self.err, "{}:1:1: error: {e}", xml.display());
                    Failure(ExitStatus::DIAGNOSTICS)
                })?;
                self.emit(o.as_deref(), &formatted)?;
                Ok(if has_errors(&diagnostics) { ExitStatus::DIAGNOSTICS } else { ExitStatus::SUCCESS })
            }
            Command::Format { model, lang, o } => {
                let (mm, g) = self.language(&lang)?;
                let syntax = self.syntax(&lang, &g, &mm)?;
                let (_, root) = self.parse_file(&model, &syntax)?;
                let formatted = syntax.format(&root).map_err(|e| {
                    let _ = writeln!(self.err, "{}:1:1: error: {e}", model.display());
                    Failure(ExitStatus::DIAGNOSTICS)
                })?;
                self.emit(o.as_deref(), &formatted)?;
                Ok(ExitStatus::SUCCESS)
            }
            Command::Complete { model, line, col, lang } => {
                let (mm, g) = self.language(&lang)?;
                let syntax = self.syntax(&lang, &g, &mm)?;
                let text = self.read(&model)?;
                let doc = AssistDocument::new(&text, &syntax);
                let ctx = doc
                    .context_at(line as usize, col as usize)
                    .map_err(|e| self.fail(&model, line as usize, col as usize, e))?;
                let Some(ctx) = ctx else { return Ok(ExitStatus::SUCCESS) };
                let cache = doc.parsed.root.as_ref().map(|r| ReferenceCache::build(r, &mm)).unwrap_or_default();
                for p in complete(&ctx, &g, &mm, &cache) {
                    let tag = match p.kind {
                        ProposalKind::Keyword => "KEYWORD",
                        ProposalKind::Template => "TEMPLATE",
                    };
                    let _ = writeln!(self.out, "{tag}\t{}", escape_line(&p.insert_text));
                }
                Ok(ExitStatus::SUCCESS)
            }
            Command::RoundtripCheck { model, lang } => {
                let (mm, g) = self.language(&lang)?;
                let syntax = self.syntax(&lang, &g, &mm)?;
                let (_, root) = self.parse_file(&model, &syntax)?;
                let name = model.display().to_string();
                let canonical = syntax.format(&root).map_err(|e| self.fail(&model, 1, 1, e))?;
                let reparsed = syntax.parse(&canonical).root.ok_or(Failure(ExitStatus::DIAGNOSTICS))?;
                let mut xml = to_eaxml(&reparsed, &mm).map_err(|e| self.xml_error(&model, e))?;
                if let Some(hook) = self.xml_hook {
                    xml = hook(xml);
                }
                let (back, _) = from_eaxml(&xml, &mm).map_err(|e| self.xml_error(&model, e))?;
                let again = match syntax.format(&back) {
                    Ok(t) => t,
                    Err(e) => format!("<cannot format: {e}>\n"),
                };
                if again == canonical {
                    return Ok(ExitStatus::SUCCESS);
                }
                let diff = TextDiff::from_lines(&canonical, &again);
                let _ = write!(
                    self.out,
                    "{}",
                    diff.unified_diff().header(&format!("{name} (canonical)"), &format!("{name} (via xml)"))
                );
                Ok(ExitStatus::DIAGNOSTICS)
            }
        }
    }
}

/// Single-line form of a snippet: backslash, newline and tab escaped.
pub fn escape_line(text: &str) -> String {
    text.replace('\\', "\\\\").replace('\n', "\\n").replace('\t', "\\t")
}

fn write_atomic(path: &Path, text: &str) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Runs the command line `args` (program name first).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with_xml_hook(args, out, err, None)
}

/// Like [`run`], but `roundtrip-check` passes its XML through `hook` before
/// reading it back.
pub fn run_with_xml_hook<I, T>(
    args: I,
    out: &mut dyn Write,
    err: &mut dyn Write,
    hook: Option<&dyn Fn(String) -> String>,
) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                ExitStatus::USAGE
            } else {
                let _ = write!(out, "{text}");
                ExitStatus::SUCCESS
            };
        }
    };
    let mut ctx = Ctx { out, err, xml_hook: hook };
    match ctx.dispatch(cli.command) {
        Ok(status) => status,
        Err(Failure(status)) => status,
    }
}
