use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::ops::Range;
use std::path::{Path, PathBuf};

use activecircle::evaluation::{compute_metrics, functional_profile, zero_crossings, ProfileAxis};
use activecircle::filters::FilterKind;
use activecircle::phantom::{render_phantom, PhantomSpec};
use activecircle::Circle;
use clap::{Parser, Subcommand};

use crate::config::{ConfigOverrides, RunConfig};
use crate::error::{CliError, Result};
use crate::io::{export_phantom, load_video, read_diameters_cm, save_track_csv};
use crate::overlay::render_overlay;
use crate::pipeline::run_tracking;
use crate::service::{self, DEFAULT_PORT, PORT_ENV};

#[derive(Debug, Parser)]
#[command(name = "activecircle", version, about = "Track vessel diameter in ultrasound video with an active circle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Track a circle from a seed point through every frame.
    Track {
        /// Frame directory or phantom spec file.
        #[arg(long)]
        input: PathBuf,
        /// Seed point inside the vessel, `X,Y` in pixels.
        #[arg(long, value_parser = parse_pair)]
        seed: [f64; 2],
        /// Flat TOML file of engine and filter settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Pre-filter `none`, `median`, `bilateral` or `wiener`.
        #[arg(long, value_parser = parse_filter)]
        filter: Option<FilterKind>,
        #[arg(long)]
        out_csv: PathBuf,
        /// Write one overlay PNG per frame here.
        #[arg(long)]
        overlay: Option<PathBuf>,
        /// Pixel spacing in cm, overriding sidecar and default.
        #[arg(long)]
        pixel_spacing: Option<f64>,
    },
    /// Render a synthetic phantom to numbered PNGs plus a truth CSV.
    Phantom {
        /// Phantom spec file; the standard phantom when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the diameter_cm columns of two CSV files.
    Eval {
        #[arg(long)]
        est: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Half-open frame range `A:B`.
        #[arg(long, value_parser = parse_range)]
        range: Option<Range<usize>>,
    },
    /// Print the averaged functional around a circle as CSV.
    Profile {
        /// Frame directory or phantom spec file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        frame: usize,
        /// `dx`, `dy` or `diameter`.
        #[arg(long, default_value = "diameter")]
        axis: ProfileAxis,
        /// Reference circle `X,Y,R`; phantom inputs default to the truth.
        #[arg(long, value_parser = parse_circle)]
        circle: Option<Circle>,
        /// Offsets `FROM:TO:STEP`; pixels for dx/dy, a multiple of the
        /// reference diameter for `diameter`.
        #[arg(long, value_parser = parse_offsets)]
        offsets: Option<Offsets>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Serve the HTTP session API for the annotator UI.
    Serve {
        #[arg(long, env = PORT_ENV, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Directory served at `/`, typically the built UI.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
}

fn parse_numbers<const N: usize>(s: &str, sep: char, what: &str) -> std::result::Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(sep).collect();
    if parts.len() != N {
        return Err(format!("expected {what}"));
    }
    let mut out = [0.0; N];
    for (slot, part) in out.iter_mut().zip(parts) {
        *slot = part.trim().parse().map_err(|_| format!("bad number `{part}` in {what}"))?;
    }
    Ok(out)
}

fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    parse_numbers::<2>(s, ',', "X,Y")
}

fn parse_circle(s: &str) -> std::result::Result<Circle, String> {
    let [x, y, r] = parse_numbers::<3>(s, ',', "X,Y,R")?;
    Circle::new(x, y, r).map_err(|e| e.to_string())
}

/// Profile offsets; a newtype so clap treats the list as one value.
#[derive(Debug, Clone, PartialEq)]
struct Offsets(Vec<f64>);

fn parse_offsets(s: &str) -> std::result::Result<Offsets, String> {
    let [from, to, step] = parse_numbers::<3>(s, ':', "FROM:TO:STEP")?;
    if !(step > 0.0) || to < from {
        return Err("offsets need FROM <= TO and STEP > 0".into());
    }
    let n = ((to - from) / step + 1e-9).floor() as usize;
    Ok(Offsets((0..=n).map(|i| from + i as f64 * step).collect()))
}

fn parse_range(s: &str) -> std::result::Result<Range<usize>, String> {
    let (a, b) = s.split_once(':').ok_or("expected A:B")?;
    let a = a.trim().parse().map_err(|_| format!("bad range start `{a}`"))?;
    let b = b.trim().parse().map_err(|_| format!("bad range end `{b}`"))?;
    Ok(a..b)
}

fn parse_filter(s: &str) -> std::result::Result<FilterKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
        .map_err(|_| format!("unknown filter `{s}` (none, median, bilateral, wiener)"))
}

fn run_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => ConfigOverrides::load(p)?.apply(RunConfig::default()),
        None => Ok(RunConfig::default()),
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_cli_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

/// [`run_cli`] with explicit output streams.
pub fn run_cli_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error[{}]: {}", e.class(), e.to_string().replace('\n', " "));
            1
        }
    }
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let io_err = |e: std::io::Error| CliError::io("<stdout>", e);
    match command {
        Command::Track {
            input,
            seed,
            config,
            filter,
            out_csv,
            overlay,
            pixel_spacing,
        } => {
            let mut cfg = run_config(config.as_deref())?;
            if let Some(kind) = filter {
                cfg.filter.kind = kind;
            }
            let video = load_video(&input, pixel_spacing)?;
            let result = run_tracking(&video.frames, seed, &cfg, |_, _| {})?;
            save_track_csv(&out_csv, &result)?;
            if let Some(dir) = overlay {
                std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
                for (i, (frame, r)) in video.frames.iter().zip(&result.per_frame).enumerate() {
                    let path = dir.join(format!("overlay_{i:04}.png"));
                    render_overlay(frame, &r.circle).save(&path).map_err(|e| CliError::Image {
                        path: path.clone(),
                        message: e.to_string(),
                    })?;
                }
            }
            let unconverged = result.per_frame.iter().filter(|r| !r.converged).count();
            writeln!(
                err,
                "tracked {} frames, {} hit the iteration cap",
                result.per_frame.len(),
                unconverged
            )
            .map_err(io_err)?;
            if let Some(truth) = &video.truth {
                let n = result.per_frame.len();
                let report = compute_metrics(&result.diameters_cm(), &truth.diameters_cm(), 0..n)?;
                write!(err, "against phantom truth (cm):\n{}", report.summary()).map_err(io_err)?;
            }
            Ok(())
        }
        Command::Phantom { spec, out: dir } => {
            let spec = match spec {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
                    PhantomSpec::parse(&text)?
                }
                None => PhantomSpec::standard(),
            };
            let (frames, truth) = render_phantom(&spec)?;
            export_phantom(&dir, &frames, &truth)?;
            writeln!(out, "wrote {} frames to {}", frames.len(), dir.display()).map_err(io_err)
        }
        Command::Eval { est, reference, range } => {
            let e = read_diameters_cm(&est)?;
            let r = read_diameters_cm(&reference)?;
            let range = range.unwrap_or(0..e.len());
            let report = compute_metrics(&e, &r, range)?;
            write!(out, "{}", report.summary()).map_err(io_err)
        }
        Command::Profile {
            input,
            frame,
            axis,
            circle,
            offsets,
            config,
        } => {
            let cfg = run_config(config.as_deref())?;
            let video = load_video(&input, None)?;
            let f = video.frames.get(frame).ok_or(activecircle::Error::IndexOutOfRange {
                index: frame,
                len: video.frames.len(),
            })?;
            let reference = match (circle, &video.truth) {
                (Some(c), _) => c,
                (None, Some(t)) => t.frames[frame].circle(),
                (None, None) => return Err(CliError::Config("--circle is required for frame directories".into())),
            };
            let offsets = offsets.map(|o| o.0).unwrap_or_else(|| match axis {
                ProfileAxis::Diameter => (0..=40).map(|i| 0.5 + i as f64 * 0.025).collect(),
                _ => (0..=40).map(|i| -10.0 + i as f64 * 0.5).collect(),
            });
            let profile = functional_profile(f, &reference, axis, &offsets, &cfg.engine)?;
            writeln!(out, "offset,mean_functional").map_err(io_err)?;
            for p in &profile {
                writeln!(out, "{},{}", p.abscissa, p.mean_functional).map_err(io_err)?;
            }
            writeln!(err, "zero crossings: {:?}", zero_crossings(&profile)).map_err(io_err)
        }
        Command::Serve { port, host, static_dir } => {
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::io("<runtime>", e))?;
            let addr = SocketAddr::new(host, port);
            runtime
                .block_on(service::serve(addr, static_dir))
                .map_err(|e| CliError::io(format!("{addr}"), e))
        }
    }
}
