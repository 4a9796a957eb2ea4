use std::collections::BTreeMap;

use berkdyn::arith::{format_rational, parse_rational};
use berkdyn::graph::{dirichlet_extend, graph_laplacian, mass_in, write_measure_csv as write_graph_measure_csv, Edge};
use berkdyn::harness::{circle_sample, green_table, report_contraction, sweep_chi, sweep_equilibrium, write_green_csv, SweepConfig, SweepTable};
use berkdyn::measures::{energy_pairing, equilibrium_arch, equilibrium_nonarch, write_measure_csv, Measure, PairingSample};
use berkdyn::{berkovich, BerkPoint, CxPoint, Error, Execution, MetricGraph, PLFunction, Q, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::input::{complex, graph, json_text, ConfigValues};
use crate::{Cli, Command, GraphCommand, Mode, OutFormat};

fn note(cli: &Cli, msg: impl AsRef<str>) {
    if !cli.quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn write_json(out: &mut Vec<u8>, v: &impl serde::Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, v)?;
    out.push(b'\n');
    Ok(())
}

fn sweep_config(cli: &Cli) -> Result<SweepConfig> {
    match &cli.config {
        Some(p) => SweepConfig::from_json(&std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?),
        None => Ok(SweepConfig::default()),
    }
}

fn emit_table(cli: &Cli, cfg: &SweepConfig, table: &SweepTable, out: &mut Vec<u8>) -> Result<()> {
    let mut buf = Vec::new();
    match cli.out {
        OutFormat::Csv => table.write_csv(&mut buf)?,
        OutFormat::Json => write_json(&mut buf, table)?,
    }
    for m in &table.modulus {
        note(cli, format!("{}: tail modulus {:.3e}", m.fn_id, m.tail_max));
    }
    for r in table.rows.iter().filter(|r| r.note.is_some()) {
        note(cli, format!("row {} {} {} failed: {}", r.place_kind, r.place_param, r.fn_id, r.note.as_deref().unwrap_or("")));
    }
    match (&cli.output, &cfg.out) {
        (None, Some(path)) => std::fs::write(path, &buf)?,
        _ => out.extend(buf),
    }
    Ok(())
}

fn measure_json(mu: &Measure) -> serde_json::Value {
    json!({
        "atoms": mu.atoms.iter().map(|(x, w)| json!({"point": x, "weight": w})).collect::<Vec<_>>(),
        "haar": mu.haar.iter().map(|h| json!({"center": {"re": h.center.re, "im": h.center.im}, "radius": h.radius, "weight": h.weight})).collect::<Vec<_>>(),
        "total_mass": mu.total_mass(),
    })
}

fn values(text: &str) -> Result<Vec<Q>> {
    let v: Vec<serde_json::Value> = serde_json::from_str(text)?;
    v.iter()
        .map(|x| match x {
            serde_json::Value::String(s) => parse_rational(s),
            serde_json::Value::Number(n) => parse_rational(&n.to_string()),
            other => Err(Error::Parse(format!("expected a rational, got {other}"))),
        })
        .collect()
}

pub fn run(cli: &Cli, out: &mut Vec<u8>) -> Result<()> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let is_sweep = matches!(cli.command, Command::SweepChi | Command::SweepEq);
    let cfg = if is_sweep { ConfigValues::default() } else { ConfigValues::load(cli.config.as_deref())? };
    match &cli.command {
        Command::Green { map, place, points, tol } => {
            let (place, f, points) = (cfg.place(place)?, cfg.map(map, "map")?, cfg.points(points)?);
            let rows = green_table(exec, &place, &f, &points, *tol)?;
            match cli.out {
                OutFormat::Csv => write_green_csv(&rows, &mut *out)?,
                OutFormat::Json => write_json(out, &rows)?,
            }
        }
        Command::Equilibrium { map, place, mode, n, seed_point, skeleton, tol, refine } => {
            let (place, f) = (cfg.place(place)?, cfg.map(map, "map")?);
            match mode {
                Mode::Arch => {
                    let seed = CxPoint::Finite(complex(seed_point)?);
                    let eq = equilibrium_arch(exec, &place, &f, seed, *n)?;
                    if let Some(w) = &eq.warning {
                        note(cli, format!("warning: {w}"));
                    }
                    let mu = eq.measure();
                    match cli.out {
                        OutFormat::Csv => write_measure_csv(&mu, &mut *out)?,
                        OutFormat::Json => {
                            let mut v = measure_json(&mu);
                            v["warning"] = json!(eq.warning);
                            write_json(out, &v)?
                        }
                    }
                }
                Mode::Nonarch => {
                    let sk = match cfg.skeleton(skeleton)? {
                        Some(s) => s,
                        None => berkdyn::harness::default_skeleton(&place)?,
                    };
                    let eq = equilibrium_nonarch(exec, &place, &f, &sk, *tol, *refine)?;
                    let min = eq.min_weight.as_ref().map(format_rational);
                    note(cli, format!("total mass {}, min atom {}", format_rational(&eq.total_mass), min.clone().unwrap_or_default()));
                    if eq.has_negative_atoms() {
                        note(cli, "warning: negative atoms, the skeleton needs refinement");
                    }
                    let mu = eq.to_measure();
                    match cli.out {
                        OutFormat::Csv => write_measure_csv(&mu, &mut *out)?,
                        OutFormat::Json => {
                            let mut v = measure_json(&mu);
                            v["total_mass_exact"] = json!(format_rational(&eq.total_mass));
                            v["min_weight"] = json!(min);
                            v["exact"] = json!(eq.exact);
                            v["skeleton"] = serde_json::to_value(eq.skeleton.to_json())?;
                            write_json(out, &v)?
                        }
                    }
                }
            }
        }
        Command::SweepChi => {
            let sc = sweep_config(cli)?;
            let table = sweep_chi(exec, &sc)?;
            emit_table(cli, &sc, &table, out)?;
        }
        Command::SweepEq => {
            let sc = sweep_config(cli)?;
            let table = sweep_equilibrium(exec, &sc)?;
            emit_table(cli, &sc, &table, out)?;
        }
        Command::Contraction { map, place, center, radius, samples, levels, random } => {
            let (place, f) = (cfg.place(place)?, cfg.map(map, "map")?);
            if !place.is_archimedean() {
                return Err(Error::Domain("circle samples live over archimedean places".into()));
            }
            let mut sample = circle_sample(complex(center)?, *radius, *samples);
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            for _ in 0..*random {
                let z = Complex64::from_polar(rng.gen_range(0.5..2.0), rng.gen_range(0.0..std::f64::consts::TAU));
                sample.push(BerkPoint::complex(z.re, z.im));
            }
            let report = report_contraction(exec, &place, &f, &sample, *levels)?;
            note(cli, format!("max ratio {:.6}, G = {:.6}", report.max_ratio(), report.gmax));
            match cli.out {
                OutFormat::Csv => report.write_csv(&mut *out)?,
                OutFormat::Json => write_json(out, &report)?,
            }
        }
        Command::Graph { action } => run_graph(cli, &cfg, action, out)?,
        Command::Pairing { map, map2, place, n, seed_point, skeleton, tol } => {
            let (place, f, g) = (cfg.place(place)?, cfg.map(map, "map")?, cfg.map(map2, "map2")?);
            let sample = if place.is_archimedean() {
                PairingSample::Preimages { seed: CxPoint::Finite(complex(seed_point)?), n: *n, tol: *tol }
            } else {
                let sk = match cfg.skeleton(skeleton)? {
                    Some(s) => s,
                    None => berkdyn::harness::default_skeleton(&place)?,
                };
                PairingSample::Skeleton { skeleton: sk, tol: *tol, refine_depth: 2 }
            };
            let value = energy_pairing(exec, &place, &f, &g, &sample)?;
            match cli.out {
                OutFormat::Csv => {
                    let mut w = csv::Writer::from_writer(&mut *out);
                    w.write_record(["place_kind", "place_param", "n_used", "value"]).map_err(|e| Error::Io(e.to_string()))?;
                    w.write_record([place.kind_str().to_string(), place.param_string(), n.to_string(), value.to_string()]).map_err(|e| Error::Io(e.to_string()))?;
                    w.flush()?;
                }
                OutFormat::Json => write_json(out, &json!({"place": place, "n_used": n, "value": value}))?,
            }
        }
    }
    Ok(())
}

fn run_graph(cli: &Cli, cfg: &ConfigValues, action: &GraphCommand, out: &mut Vec<u8>) -> Result<()> {
    match action {
        GraphCommand::Skeleton { place, points } => {
            let place = cfg.place(place)?;
            let pts: Vec<BerkPoint> = cfg.points(points)?.into_iter().map(|(_, p)| p).collect();
            let g = berkovich::build_skeleton(&place, &pts)?;
            write_json(out, &g.to_json())?;
        }
        GraphCommand::Laplacian { graph: g, values: v } => {
            let g = graph(&json_text(g)?)?;
            let u = PLFunction::new(g, values(&json_text(v)?)?)?;
            let lap = graph_laplacian(&u);
            match cli.out {
                OutFormat::Csv => write_graph_measure_csv(&lap, &mut *out)?,
                OutFormat::Json => {
                    let atoms: Vec<_> = lap.atoms.iter().map(|(v, w)| json!([v, format_rational(w)])).collect();
                    write_json(out, &json!({ "atoms": atoms }))?
                }
            }
        }
        GraphCommand::Dirichlet { graph: g, boundary_values } => {
            let g = graph(&json_text(g)?)?;
            let raw: BTreeMap<String, serde_json::Value> = serde_json::from_str(&json_text(boundary_values)?)?;
            let mut bv = BTreeMap::new();
            for (k, v) in raw {
                let id: usize = k.parse().map_err(|_| Error::Parse(format!("bad vertex id {k:?}")))?;
                let text = match v {
                    serde_json::Value::String(s) => s,
                    other => other.to_string(),
                };
                bv.insert(id, parse_rational(&text)?);
            }
            let u = dirichlet_extend(&g, &bv)?;
            let vals: Vec<String> = u.values().iter().map(format_rational).collect();
            match cli.out {
                OutFormat::Csv => {
                    let mut w = csv::Writer::from_writer(&mut *out);
                    w.write_record(["vertex_id", "value"]).map_err(|e| Error::Io(e.to_string()))?;
                    for (i, v) in vals.iter().enumerate() {
                        w.write_record([i.to_string(), v.clone()]).map_err(|e| Error::Io(e.to_string()))?;
                    }
                    w.flush()?;
                }
                OutFormat::Json => write_json(out, &json!({ "values": vals }))?,
            }
        }
        GraphCommand::Mass { graph: g, values: v, region, ell } => {
            let g = graph(&json_text(g)?)?;
            let u = PLFunction::new(g, values(&json_text(v)?)?)?;
            let region: Vec<usize> = region
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| Error::Parse(format!("bad vertex id {s:?}"))))
                .collect::<Result<_>>()?;
            let m = mass_in(&u, &region, &parse_rational(ell)?)?;
            let row = json!({
                "mass": format_rational(&m.mass),
                "bound": format_rational(&m.bound),
                "holds": m.holds(),
                "outgoing_edges": m.outgoing_edges,
                "subharmonic": m.subharmonic,
            });
            match cli.out {
                OutFormat::Csv => {
                    let mut w = csv::Writer::from_writer(&mut *out);
                    w.write_record(["mass", "bound", "holds", "outgoing_edges", "subharmonic"]).map_err(|e| Error::Io(e.to_string()))?;
                    w.write_record([format_rational(&m.mass), format_rational(&m.bound), m.holds().to_string(), m.outgoing_edges.to_string(), m.subharmonic.to_string()])
                        .map_err(|e| Error::Io(e.to_string()))?;
                    w.flush()?;
                }
                OutFormat::Json => write_json(out, &row)?,
            }
        }
        GraphCommand::RandomTree { vertices } => {
            if *vertices < 2 {
                return Err(Error::Domain("a tree needs at least 2 vertices".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let edges: Vec<Edge<Q>> = (1..*vertices)
                .map(|i| Edge { a: rng.gen_range(0..i), b: i, length: Q::new(rng.gen_range(1i64..12).into(), rng.gen_range(1i64..6).into()) })
                .collect();
            let g = MetricGraph::new(vec![None; *vertices], edges, Vec::new())?;
            let leaves = g.leaves();
            write_json(out, &g.with_boundary(leaves)?.to_json())?;
        }
    }
    Ok(())
}
