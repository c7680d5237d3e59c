use std::fs;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use dynhom::circuit::{build_proof_tree, encode_instance, Circuit, InputVector};
use dynhom::engine::{DataIndex, EngineState};
use dynhom::hypergraph::{Hypergraph, Schema};
use dynhom::msf::MaxSpanningForest;
use dynhom::oracle::{random_change_script, DMode, ScriptLimits};
use dynhom::script::render_script;
use dynhom::session::{run_script, RunOptions};

/// Incremental acyclicity, join-forest and homomorphism maintenance.
///
/// By default a change script is read from stdin (or --script) and executed
/// command by command. With --random N a script is generated from the seed
/// and executed. With --circuit the file is parsed as a layered circuit and,
/// given --circuit-input, evaluated both directly and through the proof-tree
/// reduction.
#[derive(Parser)]
#[command(name = "dynhom", version)]
struct Cli {
    /// Script file; stdin when absent.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Seed for --random.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generate and execute a random script with this many steps.
    #[arg(long, value_name = "STEPS")]
    random: Option<usize>,
    /// Run the oracle check after every K executed commands.
    #[arg(long, value_name = "K")]
    check_every: Option<usize>,
    /// Suppress ok/applied/denied confirmations.
    #[arg(long)]
    quiet: bool,
    /// Circuit file to load instead of running a script.
    #[arg(long)]
    circuit: Option<PathBuf>,
    /// Input bits for --circuit, e.g. 1011.
    #[arg(long, value_name = "BITS")]
    circuit_input: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("dynhom: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    if let Some(path) = &cli.circuit {
        return circuit_mode(path, cli.circuit_input.as_deref());
    }
    let opts = RunOptions {
        quiet: cli.quiet,
        check_every: cli.check_every,
    };
    let stdout = io::stdout().lock();
    let status = if let Some(steps) = cli.random {
        let schema = Schema::new(vec![
            ("E".to_string(), 2),
            ("F".to_string(), 1),
            ("G".to_string(), 3),
        ])?;
        let limits = ScriptLimits {
            d_mode: DMode::Replace,
            ..Default::default()
        };
        let text = render_script(&random_change_script(&schema, steps, &limits, cli.seed));
        run_script(text.as_bytes(), stdout, opts)?
    } else if let Some(path) = &cli.script {
        let file = BufReader::new(fs::File::open(path)?);
        run_script(file, stdout, opts)?
    } else {
        run_script(io::stdin().lock(), stdout, opts)?
    };
    Ok(ExitCode::from(status as u8))
}

fn circuit_mode(
    path: &PathBuf,
    input: Option<&str>,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let text = fs::read_to_string(path)?;
    let circuit = Circuit::from_text(&text)?;
    let mut out = io::stdout().lock();
    match circuit.validate_normal_form() {
        Ok(()) => writeln!(
            out,
            "circuit: {} inputs, depth {}, {} gates, normal form ok",
            circuit.n_inputs,
            circuit.depth(),
            circuit.gate_count()
        )?,
        Err(v) => {
            writeln!(out, "circuit: not in normal form: {v}")?;
            return Ok(ExitCode::from(1));
        }
    }
    let Some(bits) = input else {
        return Ok(ExitCode::SUCCESS);
    };
    let x = InputVector::parse(bits)?;
    let eval = circuit.eval(&x)?;
    writeln!(out, "eval: {}", if eval { "yes" } else { "no" })?;

    let q = build_proof_tree(circuit.depth())?;
    let mut forest = MaxSpanningForest::new(q.schema());
    let mut staged = Hypergraph::new(q.schema().clone(), q.domain_size());
    for e in q.edges_iter() {
        staged.insert_edge(&e)?;
        forest.insert_hyperedge(&staged, &e)?;
    }
    let data = DataIndex::from_hypergraph(&encode_instance(&circuit, &x)?);
    let engine = EngineState::attach(&q, &forest, data)?;
    let reduction = engine.answer();
    writeln!(out, "reduction: {}", if reduction { "yes" } else { "no" })?;
    writeln!(
        out,
        "agree: {}",
        if reduction == eval { "yes" } else { "no" }
    )?;
    Ok(if reduction == eval {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
