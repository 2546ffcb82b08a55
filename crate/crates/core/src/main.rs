use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use spacetime_refraction::io::config::{self, Document, HeatmapSettings, Mode};
use spacetime_refraction::io::pgm::{render_heatmap, HeatmapSpec};
use spacetime_refraction::io::{read_csv, run};
use spacetime_refraction::ray::{predict_spinor_worldlines, predict_worldlines};
use spacetime_refraction::{Error, Result};

#[derive(Parser)]
#[command(name = "spacetime-refraction", version, about = "Wave packets refracting at potential steps, in space and time")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Refraction angle in the (x, v0 t) plane from the ray model.
    Snell(Common),
    /// Predicted ray worldlines for a packet; no simulation.
    Ray(Common),
    /// Scalar packet hitting a potential step.
    SimulateStep(Common),
    /// Spin-1/2 packet hitting a Zeeman step.
    SimulateSpinor(Common),
    /// Turn a density CSV into a PGM heatmap.
    Render(RenderArgs),
}

#[derive(Args)]
struct Common {
    /// Flat JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// fig2, fig3 or fig4.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Write density CSV files.
    #[arg(long)]
    csv: bool,
    /// Write PGM heatmaps.
    #[arg(long)]
    pgm: bool,
    /// Write report.json (the report is always printed).
    #[arg(long)]
    report: bool,
    /// Quadrature nodes.
    #[arg(long)]
    nodes: Option<usize>,
    /// Grid size as `nx,nt`.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    /// Grid window as `xmin,xmax,tmin,tmax`.
    #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
    window: Option<[f64; 4]>,
    /// Worker threads; never changes the output.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RenderArgs {
    /// Density CSV as written by the simulate commands.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    common: Common,
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts[..] {
        [nx, nt] => Ok((
            nx.trim().parse().map_err(|_| format!("bad nx `{nx}`"))?,
            nt.trim().parse().map_err(|_| format!("bad nt `{nt}`"))?,
        )),
        _ => Err("expected `nx,nt`".into()),
    }
}

fn parse_window(s: &str) -> std::result::Result<[f64; 4], String> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number `{p}`")))
        .collect::<std::result::Result<_, _>>()?;
    vals.try_into().map_err(|_| "expected `xmin,xmax,tmin,tmax`".to_string())
}

impl Common {
    /// Config file layer followed by the command-line layer.
    fn layers(&self, mode: Option<Mode>) -> Result<Vec<Document>> {
        let mut layers = Vec::new();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            let doc = config::parse_document(&text)?;
            if let (Some(mode), Some(given)) = (mode, doc.get("mode")) {
                if *given != json!(mode) {
                    return Err(Error::Schema {
                        path: "mode".into(),
                        message: format!("config says {given} but the command runs {}", json!(mode)),
                    });
                }
            }
            layers.push(doc);
        }
        let mut cli = Document::new();
        if let Some(mode) = mode {
            cli.insert("mode".into(), json!(mode));
        }
        if let Some(p) = &self.preset {
            cli.insert("preset".into(), json!(p));
        }
        if let Some(n) = self.nodes {
            cli.insert("nodes".into(), json!(n));
        }
        if let Some((nx, nt)) = self.grid {
            cli.insert("nx".into(), json!(nx));
            cli.insert("nt".into(), json!(nt));
        }
        if let Some([x_min, x_max, t_min, t_max]) = self.window {
            for (k, v) in [("x_min", x_min), ("x_max", x_max), ("t_min", t_min), ("t_max", t_max)] {
                cli.insert(k.into(), json!(v));
            }
        }
        let mut outputs: Vec<Value> = layers
            .first()
            .and_then(|d: &Document| d.get("outputs"))
            .and_then(|v| v.as_array().cloned())
            .unwrap_or_default();
        for (flag, name) in [(self.csv, "csv"), (self.pgm, "heatmap"), (self.report, "report")] {
            if flag && !outputs.contains(&json!(name)) {
                outputs.push(json!(name));
            }
        }
        if !outputs.is_empty() {
            cli.insert("outputs".into(), Value::Array(outputs));
        }
        layers.push(cli);
        Ok(layers)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.threads {
            if n == 0 {
                return Err(Error::InvalidParameter("--threads must be at least 1".into()));
            }
            b = b.num_threads(n);
        }
        b.build()
            .map_err(|e| Error::InvalidParameter(format!("cannot start thread pool: {e}")))
    }
}

fn simulate(common: &Common, mode: Mode) -> Result<String> {
    let config = config::resolve(&common.layers(Some(mode))?)?;
    let outcome = common.pool()?.install(|| run(&config, &common.out_dir))?;
    Ok(outcome.report_text())
}

fn render(args: &RenderArgs) -> Result<String> {
    let common = &args.common;
    let density = read_csv(&args.input)?;
    let grid = *density.grid();
    let described = common.config.is_some() || common.preset.is_some();
    // a config or preset only contributes display settings and rays here
    let (settings, rays) = if described {
        let mut layers = common.layers(None)?;
        layers.last_mut().unwrap().insert("mode".into(), json!(Mode::Ray));
        let c = config::resolve(&layers)?;
        let rays = match (c.packet, c.scatterer) {
            (Some(p), Some(config::Scatterer::Step(s))) => predict_worldlines(&p, &s)?.worldlines,
            (Some(p), Some(config::Scatterer::Zeeman { zeeman, spinor })) => {
                predict_spinor_worldlines(&p, &zeeman, spinor.population_up())?.worldlines
            }
            _ => Vec::new(),
        };
        (c.heatmap, rays)
    } else {
        (HeatmapSettings::default(), Vec::new())
    };
    let spec = HeatmapSpec::for_grid(&grid, settings.gamma, settings.overlay_rays, settings.normalization)?;
    std::fs::create_dir_all(&common.out_dir).map_err(|e| Error::Io {
        path: common.out_dir.clone(),
        source: e,
    })?;
    let stem = args.input.file_stem().map_or("density".into(), |s| s.to_string_lossy().into_owned());
    let out = common.out_dir.join(format!("{stem}.pgm"));
    render_heatmap(&density, &spec, Some(&rays), None, &out)?;
    let report = json!({ "mode": "render", "input": path_str(&args.input), "output": path_str(&out) });
    Ok(serde_json::to_string_pretty(&report).unwrap() + "\n")
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Snell(c) => simulate(c, Mode::Snell),
        Command::Ray(c) => simulate(c, Mode::Ray),
        Command::SimulateStep(c) => simulate(c, Mode::Step),
        Command::SimulateSpinor(c) => simulate(c, Mode::Spinor),
        Command::Render(r) => render(r),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let obj = json!({ "error": { "kind": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() } });
            eprintln!("{}", serde_json::to_string_pretty(&obj).unwrap());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
