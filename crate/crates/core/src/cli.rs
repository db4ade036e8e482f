//! Command-line driver. [`run`] does all the work and returns the text to
//! print and the exit code, so the binary is a thin wrapper and every path
//! is testable in-process.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::attention::{
    fmha_forward, max_rel_error, standard_attention, AttentionError, AttentionProblem, ErrorStat,
    Precision, StoragePrecision, Tensor4, TileConfig,
};
use crate::layout::{reshape_acc_to_operand, ComposedLayout, IntTuple, Layout};
use crate::memsim::{
    bank_conflicts, run_fmha_traced, trace_overlap, CostModel, Region, SimConfig, Sweep,
};
use crate::wgmma_map::{accumulator_fragment_layout, operand_fragment_layout, ThreadValueLayout};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;
pub const EXIT_GOLDEN: i32 = 4;

const EXIT_HELP: &str = "\
Exit codes:
  0  success
  2  configuration error (bad flags, indivisible tiles, unreadable files)
  3  verification failure (error above tolerance, schedule property violated)
  4  golden layout mismatch";

#[derive(Debug, Parser)]
#[command(name = "fmha", version, about = "Fused attention simulator", after_help = EXIT_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub args: BenchArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare the fused engine against dense attention.
    Verify,
    /// Run all four (bM, bN) tile shapes and tabulate error and traffic.
    Sweep,
    /// Print the copy/GEMM schedule of one Q-tile.
    Trace,
    /// Print the register layouts of the accumulator reshape.
    Layouts {
        /// Also dump the thread/value maps as CSV.
        #[arg(long)]
        print_layouts: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PrecisionArg {
    F32,
    F16emu,
}

#[derive(Debug, Clone, clap::Args)]
pub struct BenchArgs {
    #[arg(long, global = true, default_value_t = 256)]
    seqlen: usize,
    #[arg(long, global = true, default_value_t = 64)]
    headdim: usize,
    #[arg(long, global = true, default_value_t = 2)]
    heads: usize,
    #[arg(long, global = true, default_value_t = 1)]
    batch: usize,
    #[arg(long, global = true, default_value_t = 64)]
    tile_q: usize,
    #[arg(long, global = true, default_value_t = 64)]
    tile_k: usize,
    #[arg(long, global = true, value_enum, default_value_t = PrecisionArg::F32)]
    precision: PrecisionArg,
    /// Seed of the ChaCha8 stream that generates Q, K, V.
    #[arg(long, global = true, default_value_t = 2024)]
    seed: u64,
    /// Fused-engine repetitions for the timing line (stderr only).
    #[arg(long, global = true, default_value_t = 1)]
    iterations: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Simulator TOML (e.g. configs/hopper.toml).
    #[arg(long, global = true)]
    sim_config: Option<PathBuf>,
    /// Read q.fmht, k.fmht, v.fmht from this directory instead of generating.
    #[arg(long, global = true)]
    inputs: Option<PathBuf>,
    /// Write the inputs used as q.fmht, k.fmht, v.fmht into this directory.
    #[arg(long, global = true)]
    dump_inputs: Option<PathBuf>,
}

/// Parameters of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchConfig {
    pub seqlen: usize,
    pub headdim: usize,
    pub heads: usize,
    pub batch: usize,
    pub tile_q: usize,
    pub tile_k: usize,
    pub precision: Precision,
    pub seed: u64,
    pub iterations: usize,
    pub format: Format,
    #[serde(skip)]
    pub sim: SimConfig,
    #[serde(skip)]
    pub inputs: Option<PathBuf>,
    #[serde(skip)]
    pub dump_inputs: Option<PathBuf>,
}

impl Default for BenchConfig {
    /// Desk-scale defaults: N=256, d=64, h=2, L=1, 64×64 tiles, f32.
    fn default() -> Self {
        BenchConfig {
            seqlen: 256,
            headdim: 64,
            heads: 2,
            batch: 1,
            tile_q: 64,
            tile_k: 64,
            precision: Precision::F32,
            seed: 2024,
            iterations: 1,
            format: Format::Text,
            sim: SimConfig::default(),
            inputs: None,
            dump_inputs: None,
        }
    }
}

impl BenchConfig {
    pub fn tile(&self) -> TileConfig {
        TileConfig::new(self.tile_q, self.tile_k, self.headdim)
    }

    pub fn label(&self) -> String {
        format!(
            "L={} N={} h={} d={} bM={} bN={} {}",
            self.batch,
            self.seqlen,
            self.heads,
            self.headdim,
            self.tile_q,
            self.tile_k,
            self.precision
        )
    }

    pub fn validate(&self) -> Result<(), AttentionError> {
        if self.seqlen == 0 || self.headdim == 0 {
            return Err(AttentionError::Empty {
                n: self.seqlen,
                d: self.headdim,
            });
        }
        self.tile().validate(self.seqlen, self.headdim)
    }

    /// Inputs from `--inputs`, or Gaussian tensors determined by the seed.
    pub fn problem(&self) -> Result<AttentionProblem, String> {
        let p = match &self.inputs {
            Some(dir) => {
                let load = |name: &str| -> Result<Tensor4, String> {
                    let path = dir.join(name);
                    let f = std::fs::File::open(&path)
                        .map_err(|e| format!("{}: {e}", path.display()))?;
                    Tensor4::read_from(std::io::BufReader::new(f))
                        .map(|(t, _)| t)
                        .map_err(|e| format!("{}: {e}", path.display()))
                };
                let p = AttentionProblem::new(load("q.fmht")?, load("k.fmht")?, load("v.fmht")?)
                    .map_err(|e| e.to_string())?;
                let want = [self.batch, self.seqlen, self.heads, self.headdim];
                if p.dims() != want {
                    return Err(format!(
                        "input dims {:?} do not match flags {:?}",
                        p.dims(),
                        want
                    ));
                }
                p
            }
            None => AttentionProblem::gaussian(
                self.batch,
                self.seqlen,
                self.heads,
                self.headdim,
                self.seed,
            )
            .map_err(|e| e.to_string())?,
        };
        if let Some(dir) = &self.dump_inputs {
            dump_inputs(&p, dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        }
        Ok(p)
    }
}

fn dump_inputs(p: &AttentionProblem, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, t) in [("q.fmht", &p.q), ("k.fmht", &p.k), ("v.fmht", &p.v)] {
        let f = std::fs::File::create(dir.join(name))?;
        let mut w = std::io::BufWriter::new(f);
        t.write_to(&mut w, StoragePrecision::F32)?;
        std::io::Write::flush(&mut w)?;
    }
    Ok(())
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub text: String,
    /// Informational lines for stderr; never part of the report.
    pub diagnostics: String,
    pub code: i32,
}

impl Output {
    fn new(text: String, code: i32) -> Self {
        Output {
            text,
            diagnostics: String::new(),
            code,
        }
    }

    fn config_error(msg: impl std::fmt::Display) -> Self {
        Output {
            text: String::new(),
            diagnostics: format!("error: {msg}\n"),
            code: EXIT_CONFIG,
        }
    }
}

/// Allowed error of the fused engine against dense attention.
pub fn tolerance(prec: Precision) -> f64 {
    match prec {
        Precision::F32 => 1e-5,
        Precision::F16Emu => 5e-2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
struct VerifyRecord {
    config: String,
    precision: Precision,
    max_rel_error: f64,
    tolerance: f64,
    worst_batch: usize,
    worst_head: usize,
    worst_row: usize,
    worst_col: usize,
    status: &'static str,
}

impl VerifyRecord {
    fn new(cfg: &BenchConfig, e: &ErrorStat) -> Self {
        let tol = tolerance(cfg.precision);
        VerifyRecord {
            config: cfg.label(),
            precision: cfg.precision,
            max_rel_error: e.max_rel,
            tolerance: tol,
            worst_batch: e.at[0],
            worst_head: e.at[2],
            worst_row: e.at[1],
            worst_col: e.at[3],
            status: if e.max_rel <= tol { "PASS" } else { "FAIL" },
        }
    }
}

fn render<T: Serialize>(records: &[T], format: Format, text: impl FnOnce() -> String) -> String {
    match format {
        Format::Text => text(),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(records).expect("records serialize");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in records {
                w.serialize(r).expect("records serialize");
            }
            String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
        }
    }
}

/// Fused engine vs dense attention on the configured inputs.
pub fn cmd_verify(cfg: &BenchConfig) -> Output {
    cmd_verify_with(cfg, fmha_forward)
}

/// [`cmd_verify`] with a substitute fused engine.
pub fn cmd_verify_with(
    cfg: &BenchConfig,
    engine: impl Fn(&AttentionProblem, TileConfig, Precision) -> Result<Tensor4, AttentionError>,
) -> Output {
    if let Err(e) = cfg.validate() {
        return Output::config_error(e);
    }
    let p = match cfg.problem() {
        Ok(p) => p,
        Err(e) => return Output::config_error(e),
    };
    let want = standard_attention(&p);
    let start = Instant::now();
    let mut got = None;
    for _ in 0..cfg.iterations.max(1) {
        got = Some(match engine(&p, cfg.tile(), cfg.precision) {
            Ok(o) => o,
            Err(e) => return Output::config_error(e),
        });
    }
    let elapsed = start.elapsed() / cfg.iterations.max(1) as u32;
    let e = max_rel_error(&got.expect("at least one iteration"), &want);
    let rec = VerifyRecord::new(cfg, &e);
    let code = if rec.status == "PASS" {
        EXIT_OK
    } else {
        EXIT_VERIFY
    };
    let text = render(std::slice::from_ref(&rec), cfg.format, || {
        format!(
            "config: {}\nmaxRelError: {:.3e} (tolerance {:.0e})\nworst (b,h,row,col): ({},{},{},{}) got {} want {}\n{}\n",
            rec.config, rec.max_rel_error, rec.tolerance, e.at[0], e.at[2], e.at[1], e.at[3], e.got, e.want, rec.status
        )
    });
    let mut out = Output::new(text, code);
    out.diagnostics = format!(
        "fused engine: {:.3} ms per iteration over {} iteration(s)\n",
        elapsed.as_secs_f64() * 1e3,
        cfg.iterations.max(1)
    );
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepRow {
    pub config: String,
    #[serde(rename = "bM")]
    pub bm: usize,
    #[serde(rename = "bN")]
    pub bn: usize,
    pub max_rel_error: f64,
    pub gmem_bytes_read: u64,
    pub gmem_bytes_written: u64,
    pub kv_gmem_bytes: u64,
    pub smem_peak: usize,
    pub flops: u64,
    pub conflict_degree: Option<usize>,
    pub status: String,
}

/// Column-sweep conflict degree of a swizzled K-major `bn × d` staging tile.
fn staging_conflicts(bn: usize, d: usize, elem_bytes: usize) -> Option<usize> {
    let atom = ComposedLayout::k_major_sw128_atom(elem_bytes).ok()?;
    let tile = atom.tile_to_shape(&IntTuple::ints(&[bn, d])).ok()?;
    Some(bank_conflicts(&tile, Sweep::Column, elem_bytes))
}

/// All four tile shapes on one set of inputs; rows ordered as the grid's
/// `(bM, bN)` pairs.
pub fn cmd_sweep(cfg: &BenchConfig) -> Output {
    let p = match cfg.problem() {
        Ok(p) => p,
        Err(e) => return Output::config_error(e),
    };
    for (bm, bn) in TileConfig::GRID {
        let c = BenchConfig {
            tile_q: bm,
            tile_k: bn,
            ..cfg.clone()
        };
        if let Err(e) = c.validate() {
            return Output::config_error(e);
        }
    }
    let want = standard_attention(&p);
    let mut rows = Vec::new();
    for (bm, bn) in TileConfig::GRID {
        let c = BenchConfig {
            tile_q: bm,
            tile_k: bn,
            ..cfg.clone()
        };
        let (got, report) = match run_fmha_traced(&p, c.tile(), cfg.precision, &cfg.sim) {
            Ok(r) => r,
            Err(e) => return Output::config_error(e),
        };
        let e = max_rel_error(&got, &want);
        let g = report.region_total(Region::Gmem);
        let kv = [crate::memsim::TensorClass::K, crate::memsim::TensorClass::V]
            .iter()
            .map(|&t| report.counter(Region::Gmem, t).bytes_read)
            .sum();
        rows.push(SweepRow {
            config: c.label(),
            bm,
            bn,
            max_rel_error: e.max_rel,
            gmem_bytes_read: g.bytes_read,
            gmem_bytes_written: g.bytes_written,
            kv_gmem_bytes: kv,
            smem_peak: report.smem_peak,
            flops: report.flops,
            conflict_degree: staging_conflicts(bn, cfg.headdim, cfg.sim.elem_bytes.k),
            status: if e.max_rel <= tolerance(cfg.precision) {
                "PASS"
            } else {
                "FAIL"
            }
            .to_string(),
        });
    }
    let failed = rows.iter().any(|r| r.status != "PASS");
    let text = render(&rows, cfg.format, || sweep_table(&rows));
    Output::new(text, if failed { EXIT_VERIFY } else { EXIT_OK })
}

/// Rows bM, columns bN.
fn sweep_table(rows: &[SweepRow]) -> String {
    let mut s = String::new();
    let cell = |bm: usize, bn: usize| {
        rows.iter()
            .find(|r| r.bm == bm && r.bn == bn)
            .expect("grid cell")
    };
    writeln!(s, "{:<12}{:>36}{:>36}", "bM \\ bN", "64", "128").unwrap();
    for bm in [64, 128] {
        let fmt = |r: &SweepRow| {
            format!(
                "err {:.2e} gmem {} {}",
                r.max_rel_error,
                r.gmem_bytes_read + r.gmem_bytes_written,
                r.status
            )
        };
        writeln!(
            s,
            "{:<12}{:>36}{:>36}",
            bm,
            fmt(cell(bm, 64)),
            fmt(cell(bm, 128))
        )
        .unwrap();
    }
    if let Some(r) = rows.first() {
        writeln!(s, "flops per run: {}", r.flops).unwrap();
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct TraceRecord {
    event: String,
    issue: u64,
    complete: u64,
    deps: String,
}

/// Schedule of one Q-tile of the configured problem and its prefetch check.
pub fn cmd_trace(cfg: &BenchConfig) -> Output {
    if let Err(e) = cfg.validate() {
        return Output::config_error(e);
    }
    let tile = cfg.tile();
    let trace = trace_overlap(tile, tile.kv_tiles(cfg.seqlen), CostModel::default());
    let ok = trace.prefetch_holds() && trace.dependencies_respected();
    let records: Vec<TraceRecord> = trace
        .events
        .iter()
        .map(|e| TraceRecord {
            event: e.kind.to_string(),
            issue: e.issue,
            complete: e.complete,
            deps: e
                .deps
                .iter()
                .map(|&d| trace.events[d].kind.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        })
        .collect();
    let status = if ok { "PASS" } else { "FAIL" };
    let text = render(&records, cfg.format, || {
        let mut s = trace.to_text();
        let prop = if tile.kv_tiles(cfg.seqlen) < 2 {
            "PASS (single K tile, nothing to prefetch)"
        } else {
            status
        };
        writeln!(
            s,
            "prefetch property (K[j+1] issued before GEMM-II[j] completes): {prop}"
        )
        .unwrap();
        s
    });
    Output::new(text, if ok { EXIT_OK } else { EXIT_VERIFY })
}

/// Printed layouts expected for the two tile shapes, as `(tSrS, tOrS, tOrPLayout)`.
pub const GOLDEN_128: [&str; 3] = [
    "((_2,_2,_16),_2,_1):((_1,_2,_4),_64,_0)",
    "((_2,_2,_2),_2,_8):((_1,_2,_4),_8,_16)",
    "((_2,_2,_2),_2,_8):((_1,_2,_4),_64,_8)",
];
pub const GOLDEN_64: [&str; 3] = [
    "((_2,_2,_16),_1,_1):((_1,_2,_4),_0,_0)",
    "((_2,_2,_2),_1,_8):((_1,_2,_4),_0,_8)",
    "((_2,_2,_2),_1,_8):((_1,_2,_4),_0,_8)",
];
pub const GOLDEN_ROW_MAJOR: [usize; 16] = [0, 4, 8, 12, 1, 5, 9, 13, 2, 6, 10, 14, 3, 7, 11, 15];

/// Layout text with every integer marked static, e.g. `(_2,_4):(_1,_2)`.
pub fn static_form(layout: &Layout) -> String {
    let mut out = String::new();
    let mut prev_digit = false;
    for ch in layout.to_string().chars() {
        if ch.is_ascii_digit() && !prev_digit {
            out.push('_');
        }
        prev_digit = ch.is_ascii_digit();
        out.push(ch);
    }
    out
}

/// The three layouts for tile `(bm, bn, bk)`.
pub fn reshape_layouts(bm: usize, bn: usize, bk: usize) -> Result<[Layout; 3], String> {
    let acc = accumulator_fragment_layout(bm, bn).map_err(|e| e.to_string())?;
    let op = operand_fragment_layout(bm, bk).map_err(|e| e.to_string())?;
    let p = reshape_acc_to_operand(&acc, &op).map_err(|e| e.to_string())?;
    Ok([acc, op, p])
}

pub fn cmd_layouts(print_layouts: bool) -> Output {
    let mut s = String::new();
    let mut ok = true;
    for ((bm, bn, bk), golden) in [((128, 128, 128), GOLDEN_128), ((64, 128, 128), GOLDEN_64)] {
        writeln!(s, "tile (bM,bN,bK)=({bm},{bn},{bk})").unwrap();
        let layouts = match reshape_layouts(bm, bn, bk) {
            Ok(l) => l,
            Err(e) => {
                writeln!(s, "  error: {e}").unwrap();
                ok = false;
                continue;
            }
        };
        for ((name, l), want) in ["tSrS", "tOrS", "tOrPLayout"]
            .iter()
            .zip(&layouts)
            .zip(golden)
        {
            let got = static_form(l);
            let mark = if got == want { "ok" } else { "MISMATCH" };
            ok &= got == want;
            writeln!(s, "  {name:<11}{got}  [{mark}]").unwrap();
        }
        let identity = layouts[2] == layouts[1];
        writeln!(s, "  reshape is identity: {identity}").unwrap();
    }
    let row_major =
        Layout::new(IntTuple::ints(&[4, 4]), IntTuple::ints(&[4, 1])).expect("static layout");
    let seq: Vec<usize> = (0..16).map(|i| row_major.call(i)).collect();
    let seq_ok = seq == GOLDEN_ROW_MAJOR;
    ok &= seq_ok;
    let col_major = Layout::column_major(IntTuple::ints(&[4, 4]));
    let col: Vec<usize> = (0..16).map(|i| col_major.call(i)).collect();
    writeln!(s, "column-major {col_major}: {col:?}").unwrap();
    writeln!(
        s,
        "row-major {row_major}: {seq:?}  [{}]",
        if seq_ok { "ok" } else { "MISMATCH" }
    )
    .unwrap();
    if print_layouts {
        for tv in [
            ThreadValueLayout::clayout_64x64(),
            ThreadValueLayout::clayout_64x16(),
        ] {
            writeln!(s, "# {tv}").unwrap();
            s.push_str(&tv.to_csv());
        }
    }
    writeln!(s, "{}", if ok { "PASS" } else { "FAIL" }).unwrap();
    Output::new(s, if ok { EXIT_OK } else { EXIT_GOLDEN })
}

impl TryFrom<&BenchArgs> for BenchConfig {
    type Error = String;

    fn try_from(a: &BenchArgs) -> Result<Self, String> {
        let sim = match &a.sim_config {
            Some(path) => SimConfig::load(path).map_err(|e| e.to_string())?,
            None => SimConfig::default(),
        };
        Ok(BenchConfig {
            seqlen: a.seqlen,
            headdim: a.headdim,
            heads: a.heads,
            batch: a.batch,
            tile_q: a.tile_q,
            tile_k: a.tile_k,
            precision: match a.precision {
                PrecisionArg::F32 => Precision::F32,
                PrecisionArg::F16emu => Precision::F16Emu,
            },
            seed: a.seed,
            iterations: a.iterations,
            format: a.format,
            sim,
            inputs: a.inputs.clone(),
            dump_inputs: a.dump_inputs.clone(),
        })
    }
}

/// Execute a parsed command line, writing to `--out` when given.
pub fn run(cli: &Cli) -> Output {
    let cfg = match BenchConfig::try_from(&cli.args) {
        Ok(c) => c,
        Err(e) => return Output::config_error(e),
    };
    let mut out = match cli.command {
        Command::Verify => cmd_verify(&cfg),
        Command::Sweep => cmd_sweep(&cfg),
        Command::Trace => cmd_trace(&cfg),
        Command::Layouts { print_layouts } => cmd_layouts(print_layouts),
    };
    if let Some(path) = &cli.args.out {
        if let Err(e) = std::fs::write(path, &out.text) {
            return Output::config_error(format!("{}: {e}", path.display()));
        }
        out.text.clear();
    }
    out
}

/// Parse `args` (program name first) and run. Parse failures, `--help` and
/// `--version` come back as text with clap's exit code.
pub fn run_from_args<I, T>(args: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                Output::new(text, EXIT_OK)
            } else {
                Output {
                    text: String::new(),
                    diagnostics: text,
                    code: EXIT_CONFIG,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BenchConfig {
        BenchConfig {
            seqlen: 128,
            headdim: 32,
            heads: 1,
            ..BenchConfig::default()
        }
    }

    #[test]
    fn verify_desk_default_passes() {
        let out = cmd_verify(&BenchConfig::default());
        assert_eq!(out.code, EXIT_OK, "{}", out.text);
        assert!(out.text.contains("PASS"));
    }

    #[test]
    fn corrupted_engine_fails_with_location() {
        let out = cmd_verify_with(&small(), |p, t, prec| {
            let mut o = fmha_forward(p, t, prec)?;
            let [_, _, h, d] = o.dims();
            o.as_mut_slice()[(5 * h) * d + 3] += 1.0;
            Ok(o)
        });
        assert_eq!(out.code, EXIT_VERIFY);
        assert!(out.text.contains("(0,0,5,3)"), "{}", out.text);
        assert!(out.text.contains("FAIL"));
    }

    #[test]
    fn indivisible_tiles_are_config_errors() {
        let cfg = BenchConfig {
            seqlen: 96,
            ..small()
        };
        let out = cmd_verify_with(&cfg, |_, _, _| panic!("engine must not run"));
        assert_eq!(out.code, EXIT_CONFIG);
        assert!(out.diagnostics.contains("does not divide"));
        assert_eq!(cmd_trace(&cfg).code, EXIT_CONFIG);
    }

    #[test]
    fn sweep_rows_and_flops() {
        let cfg = BenchConfig {
            heads: 1,
            format: Format::Csv,
            ..BenchConfig::default()
        };
        let out = cmd_sweep(&cfg);
        assert_eq!(out.code, EXIT_OK, "{}", out.text);
        let lines: Vec<&str> = out.text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("config,bM,bN,maxRelError"));
        for (line, (bm, bn)) in lines[1..].iter().zip(TileConfig::GRID) {
            assert!(line.contains(&format!(",{bm},{bn},")), "{line}");
            assert!(line.contains(",16777216,"), "{line}");
            assert!(line.ends_with("PASS"));
        }
    }

    #[test]
    fn sweep_kv_traffic_falls_with_bm() {
        let cfg = BenchConfig {
            heads: 1,
            format: Format::Json,
            ..BenchConfig::default()
        };
        let rows: Vec<serde_json::Value> = serde_json::from_str(&cmd_sweep(&cfg).text).unwrap();
        let kv = |i: usize| rows[i]["kvGmemBytes"].as_u64().unwrap();
        assert!(kv(2) < kv(0));
        assert!(kv(3) < kv(1));
        assert_eq!(rows[0]["conflictDegree"], 4);
    }

    #[test]
    fn output_is_deterministic() {
        let cfg = BenchConfig {
            format: Format::Csv,
            ..small()
        };
        assert_eq!(cmd_sweep(&cfg).text, cmd_sweep(&cfg).text);
        assert_eq!(cmd_verify(&cfg).text, cmd_verify(&cfg).text);
    }

    #[test]
    fn layouts_match_golden() {
        let out = cmd_layouts(false);
        assert_eq!(out.code, EXIT_OK, "{}", out.text);
        assert!(out
            .text
            .contains("tOrPLayout ((_2,_2,_2),_2,_8):((_1,_2,_4),_64,_8)"));
        assert!(out
            .text
            .contains("[0, 4, 8, 12, 1, 5, 9, 13, 2, 6, 10, 14, 3, 7, 11, 15]"));
        let full = cmd_layouts(true);
        assert!(full.text.contains("thread,value,m,n\n0,0,0,0\n"));
    }

    #[test]
    fn static_form_marks_integers() {
        let l: Layout = "((2,2,16),2,1):((1,2,4),64,0)".parse().unwrap();
        assert_eq!(static_form(&l), GOLDEN_128[0]);
    }

    #[test]
    fn trace_reports_prefetch() {
        let out = cmd_trace(&small());
        assert_eq!(out.code, EXIT_OK);
        assert!(out.text.contains("COPY-K[1]"));
        assert!(out.text.trim_end().ends_with("PASS"));
    }

    #[test]
    fn argument_parsing_and_exit_codes() {
        let out = run_from_args([
            "fmha",
            "verify",
            "--seqlen",
            "128",
            "--headdim",
            "32",
            "--heads",
            "1",
            "--format",
            "csv",
        ]);
        assert_eq!(out.code, EXIT_OK, "{}", out.diagnostics);
        assert!(out.text.starts_with("config,precision,maxRelError"));
        assert_eq!(
            run_from_args(["fmha", "verify", "--precision", "bf16"]).code,
            EXIT_CONFIG
        );
        assert_eq!(
            run_from_args(["fmha", "verify", "--tile-q", "100"]).code,
            EXIT_CONFIG
        );
        let help = run_from_args(["fmha", "--help"]);
        assert_eq!(help.code, EXIT_OK);
        assert!(help.text.contains("4  golden layout mismatch"));
    }

    #[test]
    fn out_file_and_fixtures() {
        let dir = tempfile::tempdir().unwrap();
        let out_path = dir.path().join("report.csv");
        let fixtures = dir.path().join("fx");
        let common = [
            "--seqlen",
            "64",
            "--headdim",
            "16",
            "--heads",
            "1",
            "--format",
            "csv",
        ];
        let mut args = vec![
            "fmha",
            "verify",
            "--out",
            out_path.to_str().unwrap(),
            "--dump-inputs",
            fixtures.to_str().unwrap(),
        ];
        args.extend(common);
        let out = run_from_args(&args);
        assert_eq!(out.code, EXIT_OK, "{}", out.diagnostics);
        assert!(out.text.is_empty());
        let first = std::fs::read_to_string(&out_path).unwrap();

        let mut args = vec![
            "fmha",
            "verify",
            "--seed",
            "999",
            "--inputs",
            fixtures.to_str().unwrap(),
        ];
        args.extend(common);
        let replay = run_from_args(&args);
        assert_eq!(replay.text, first);

        let mut args = vec![
            "fmha",
            "verify",
            "--inputs",
            fixtures.to_str().unwrap(),
            "--seqlen",
            "128",
        ];
        args.extend(&common[2..]);
        assert_eq!(run_from_args(&args).code, EXIT_CONFIG);
    }
}
