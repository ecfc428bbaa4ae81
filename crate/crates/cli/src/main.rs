use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use tooldec::decode::{
    AdversarialStub, DecodeError, DecodeSession, LanguageModel, RandomLogit, RunSummary, Sampler, SamplingPolicy,
    ScriptedStub, Transcript, DEFAULT_STEP_LIMIT,
};
use tooldec::prompt::{render_compressed, token_stats};
use tooldec::{build_session_fsm, load_vocab, parse_inventory, Artifact, DocFormat, ScaffoldSpec, TokenId};

/// `println!` that ignores a closed stdout (e.g. piped into `head`).
macro_rules! outln {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(name = "tooldec", version, about = "Compile tool documentation into token automata and decode under them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile an inventory and vocabulary into an artifact file.
    Compile {
        #[arg(long)]
        schemas: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        /// `react`, `bare-call`, or a scaffold JSON file.
        #[arg(long, default_value = "react")]
        scaffold: String,
        #[arg(long, default_value = "simple-json")]
        format: DocFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a summary of an artifact.
    Inspect { artifact: PathBuf },
    /// Check session text (or a JSON list of token ids with --tokens).
    Validate {
        artifact: PathBuf,
        /// Input file, `-` for stdin.
        input: PathBuf,
        #[arg(long)]
        tokens: bool,
    },
    /// Run stub-model decode sessions and validate every transcript.
    Run {
        artifact: PathBuf,
        /// `random:<seed>`, `adversarial:<seed>` or `script:<file>`.
        #[arg(long)]
        model: String,
        /// `greedy`, `temperature:<t>` or `top-k:<k>`.
        #[arg(long, default_value = "greedy")]
        policy: String,
        #[arg(long, default_value_t = 1)]
        sessions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_STEP_LIMIT)]
        step_limit: usize,
        #[arg(long)]
        out: PathBuf,
        /// Record wall-clock time per session (makes output non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Print the compressed tool prompt, and token statistics with --vocab.
    Render {
        #[arg(long)]
        schemas: PathBuf,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long, default_value = "simple-json")]
        format: DocFormat,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("TOOLDEC_LOG")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Compile { schemas, vocab, scaffold, format, out } => compile(&schemas, &vocab, &scaffold, format, &out),
        Command::Inspect { artifact } => inspect(&artifact),
        Command::Validate { artifact, input, tokens } => validate(&artifact, &input, tokens),
        Command::Run { artifact, model, policy, sessions, seed, step_limit, out, timing } => {
            run(&RunArgs { artifact, model, policy, sessions, seed, step_limit, out, timing })
        }
        Command::Render { schemas, vocab, format } => render(&schemas, vocab.as_deref(), format),
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    if path == Path::new("-") {
        let mut buf = Vec::new();
        std::io::Read::read_to_end(&mut std::io::stdin(), &mut buf).context("reading stdin")?;
        return Ok(buf);
    }
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn load_artifact(path: &Path) -> Result<Artifact> {
    Artifact::from_bytes(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

fn compile(schemas: &Path, vocab: &Path, scaffold: &str, format: DocFormat, out: &Path) -> Result<ExitCode> {
    eprintln!(
        "config: compile schemas={} vocab={} scaffold={scaffold} format={} out={}",
        schemas.display(),
        vocab.display(),
        format_name(format),
        out.display()
    );
    let inv = parse_inventory(&read(schemas)?, format).with_context(|| format!("parsing {}", schemas.display()))?;
    let v = load_vocab(&read(vocab)?).with_context(|| format!("loading vocabulary {}", vocab.display()))?;
    let scaffold = match ScaffoldSpec::builtin(scaffold) {
        Some(s) => s,
        None => ScaffoldSpec::from_json(&read(Path::new(scaffold))?).with_context(|| format!("scaffold {scaffold}"))?,
    };
    let session = build_session_fsm(&inv, &v, &scaffold).context("compiling")?;
    let artifact = Artifact::new(v, session);
    fs::write(out, artifact.to_bytes()).with_context(|| format!("writing {}", out.display()))?;
    outln!("{}", serde_json::to_string(&artifact.fsm().stats())?);
    Ok(ExitCode::SUCCESS)
}

fn format_name(f: DocFormat) -> &'static str {
    match f {
        DocFormat::SimpleJson => "simple-json",
        DocFormat::OpenApiSubset => "openapi-subset",
    }
}

fn inspect(path: &Path) -> Result<ExitCode> {
    let a = load_artifact(path)?;
    let fsm = a.fsm();
    let stats = fsm.stats();
    let fingerprint: String = a.vocab.fingerprint().iter().map(|b| format!("{b:02x}")).collect();
    let summary = serde_json::json!({
        "format_version": tooldec::artifact::FORMAT_VERSION,
        "vocab_size": fsm.vocab_size(),
        "vocab_fingerprint": fingerprint,
        "state_count": stats.state_count,
        "transition_count": stats.transition_count,
        "mask_bytes": stats.mask_bytes,
        "free_text_states": fsm.free_text_states().count(),
        "min_tokens": fsm.distance_to_final(fsm.start()),
        "tools": a.session.inventory().tools.iter().map(|t| &t.tool_name).collect::<Vec<_>>(),
        "trie_nodes": a.session.name_trie().node_count(),
        "scaffold": serde_json::from_str::<serde_json::Value>(&a.session.scaffold().to_json())?,
    });
    outln!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(ExitCode::SUCCESS)
}

fn validate(path: &Path, input: &Path, tokens: bool) -> Result<ExitCode> {
    let a = load_artifact(path)?;
    let raw = read(input)?;
    let mut ok = true;
    let text = if tokens {
        let ids: Vec<TokenId> = serde_json::from_slice(&raw).context("token file must be a JSON list of token ids")?;
        if let Some(&bad) = ids.iter().find(|&&t| t as usize >= a.vocab.len()) {
            bail!("token id {bad} is outside the vocabulary");
        }
        let accepted = a.session.accepts(&ids);
        outln!("automaton: {}", if accepted { "accepted" } else { "rejected" });
        ok &= accepted;
        a.vocab.detokenize(&ids)
    } else {
        raw
    };
    let report = a.session.validate_text(&text);
    match &report.verdict {
        tooldec::schema::Verdict::Valid => outln!("verdict: Valid"),
        tooldec::schema::Verdict::Invalid { class, offset, message } => {
            outln!("verdict: Invalid\nerror_class: {class}\noffset: {offset}\nmessage: {message}")
        }
    }
    ok &= report.is_valid();
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

struct RunArgs {
    artifact: PathBuf,
    model: String,
    policy: String,
    sessions: usize,
    seed: u64,
    step_limit: usize,
    out: PathBuf,
    timing: bool,
}

enum ModelSpec {
    Random(u64),
    Adversarial(u64),
    Script(Vec<TokenId>),
}

fn parse_model(spec: &str, a: &Artifact) -> Result<ModelSpec> {
    let (kind, arg) = spec.split_once(':').ok_or_else(|| anyhow!("model spec `{spec}` needs the form kind:arg"))?;
    let seed = || arg.parse::<u64>().map_err(|_| anyhow!("bad seed `{arg}` in model spec"));
    Ok(match kind {
        "random" => ModelSpec::Random(seed()?),
        "adversarial" => ModelSpec::Adversarial(seed()?),
        "script" => {
            let raw = read(Path::new(arg))?;
            let ids = match serde_json::from_slice::<Vec<TokenId>>(&raw) {
                Ok(ids) => ids,
                Err(_) => a.vocab.tokenize_greedy(&raw).with_context(|| format!("tokenizing script {arg}"))?,
            };
            if let Some(&bad) = ids.iter().find(|&&t| t as usize >= a.vocab.len()) {
                bail!("script token {bad} is outside the vocabulary");
            }
            ModelSpec::Script(ids)
        }
        _ => bail!("unknown model kind `{kind}` (expected random, adversarial or script)"),
    })
}

fn run(args: &RunArgs) -> Result<ExitCode> {
    eprintln!(
        "config: run artifact={} model={} policy={} sessions={} seed={} step_limit={} out={} timing={}",
        args.artifact.display(),
        args.model,
        args.policy,
        args.sessions,
        args.seed,
        args.step_limit,
        args.out.display(),
        args.timing
    );
    let a = load_artifact(&args.artifact)?;
    let model = parse_model(&args.model, &a)?;
    let policy = SamplingPolicy::parse(&args.policy, args.seed).map_err(|e| anyhow!(e))?;
    let fsm = a.fsm();
    let needed = fsm.distance_to_final(fsm.start()) as usize;
    if needed > args.step_limit {
        bail!("--step-limit {} is below the {needed} tokens the shortest output needs", args.step_limit);
    }

    let transcripts: Vec<Transcript> = (0..args.sessions)
        .into_par_iter()
        .map(|i| {
            let started = Instant::now();
            let offset = i as u64;
            let (mut lm, seed): (Box<dyn LanguageModel + '_>, u64) = match &model {
                ModelSpec::Random(s) => (Box::new(RandomLogit::new(fsm.vocab_size(), s + offset)), s + offset),
                ModelSpec::Adversarial(s) => (Box::new(AdversarialStub::new(fsm, s + offset)), s + offset),
                ModelSpec::Script(ids) => {
                    (Box::new(ScriptedStub::new(fsm.vocab_size(), ids.clone(), fsm.eos())), args.seed + offset)
                }
            };
            let policy = policy.with_seed(args.seed + offset);
            let mut sampler = Sampler::new(policy);
            let mut session = DecodeSession::new(fsm, args.step_limit).expect("step limit checked");
            let outcome = session.run(lm.as_mut(), &mut sampler);
            let token_ids = session.prefix().to_vec();
            let text = a.vocab.detokenize(&token_ids);
            let mut t = Transcript {
                session: i,
                seed,
                policy: policy.to_string(),
                token_ids,
                text: String::from_utf8_lossy(&text).into_owned(),
                verdict: String::new(),
                error_class: None,
                error_offset: None,
                steps: session.steps(),
                fallbacks: session.fallbacks(),
                wall_micros: 0,
            };
            match outcome {
                Ok(_) => t.set_verdict(&a.session.validate_text(&text)),
                Err(DecodeError::StepLimitExceeded { .. }) => t.verdict = "Incomplete".into(),
                Err(e) => {
                    log::warn!("session {i}: {e}");
                    t.verdict = "Incomplete".into();
                }
            }
            if args.timing {
                t.wall_micros = started.elapsed().as_micros() as u64;
            }
            t
        })
        .collect();

    let mut out = std::io::BufWriter::new(
        fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?,
    );
    for t in &transcripts {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    let summary = RunSummary::of(&transcripts);
    outln!("{}", serde_json::to_string(&summary)?);
    Ok(if summary.error_rate == 0.0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn render(schemas: &Path, vocab: Option<&Path>, format: DocFormat) -> Result<ExitCode> {
    let inv = parse_inventory(&read(schemas)?, format).with_context(|| format!("parsing {}", schemas.display()))?;
    let text = match vocab {
        None => render_compressed(&inv),
        Some(path) => {
            let v = load_vocab(&read(path)?).with_context(|| format!("loading vocabulary {}", path.display()))?;
            let stats = token_stats(&inv, &v).context("counting tokens")?;
            format!(
                "{}\n{}mean\t{:.2}\t{:.2}\t{:.4}\n",
                stats.text,
                stats.to_tsv(),
                stats.mean_raw(),
                stats.mean_compressed(),
                stats.ratio()
            )
        }
    };
    let _ = std::io::stdout().write_all(text.as_bytes());
    Ok(ExitCode::SUCCESS)
}
