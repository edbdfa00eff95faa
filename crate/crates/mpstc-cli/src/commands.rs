//! The subcommands. Each returns a [`Report`] carrying both renderings, or
//! an [`InputError`] for problems with the invocation itself.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use serde_json::{json, Value as Json};
use thiserror::Error;

use mpstc_core::{
    adequacy_check, bisim_bounded, denote_computation, infer_computation, parse_session_file, parse_session_type, project, resolve_type,
    run_session, session_well_typed, siso_subtype_oracle, subtype_with, type_configuration, well_formed, BisimSide, Configuration, Participant,
    ProbeConfig, Program, Scheduler, SessionType, SubtypeOptions, TypingContexts, Verdict,
};

/// A problem with the invocation: exit code 2.
#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// The answer of a command.
pub struct Report {
    /// Whether the answer is "success/true" (exit 0) or not (exit 1).
    pub ok: bool,
    /// Human-readable rendering.
    pub text: String,
    /// Machine-readable rendering.
    pub json: Json,
}

fn load(path: &Path) -> Result<Program, InputError> {
    let src = fs::read_to_string(path).map_err(|source| InputError::Read { path: path.display().to_string(), source })?;
    parse_session_file(&src).map_err(|e| InputError::Parse { path: path.display().to_string(), message: e.to_string() })
}

fn parse_type(what: &str, src: &str) -> Result<SessionType, InputError> {
    let t = parse_session_type(src).map_err(|e| InputError::Parse { path: what.to_string(), message: e.to_string() })?;
    well_formed(&t, &BTreeSet::new()).map_err(|e| InputError::Invalid(format!("{what}: {e}")))?;
    Ok(t)
}

/// Parses `--int-probes`.
pub fn probe_config(int_probes: &str, depth: usize) -> Result<ProbeConfig, InputError> {
    let int_probes = int_probes
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<i64>().map_err(|_| InputError::Invalid(format!("--int-probes: `{s}` is not an integer"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ProbeConfig { depth, int_probes })
}

/// `mpstc check`.
pub fn check(file: &Path, fuel: usize) -> Result<Report, InputError> {
    let prog = load(file)?;
    let report = session_well_typed(&prog, fuel);
    let mut text = String::new();
    for e in &report.errors {
        let _ = writeln!(text, "error: {e}");
    }
    for r in &report.roles {
        let ty = r.ty.as_deref().unwrap_or("?");
        match &r.error {
            None => {
                let result = r.result.map(|b| b.to_string()).unwrap_or_default();
                let _ = writeln!(text, "{}: ok ({result} ⊲ {ty})", r.role);
            }
            Some(e) => {
                let _ = writeln!(text, "{}: error at {ty}: {e}", r.role);
            }
        }
    }
    let _ = writeln!(text, "{}", if report.ok() { "session well-typed" } else { "session ill-typed" });
    Ok(Report {
        ok: report.ok(),
        json: json!({ "command": "check", "ok": report.ok(), "errors": report.errors, "roles": report.roles }),
        text,
    })
}

/// `mpstc subtype`.
pub fn subtype(sub: &str, sup: &str, fuel: usize, max_pairs: usize, oracle: bool, explain: bool) -> Result<Report, InputError> {
    let t = parse_type("subtype", sub)?;
    let u = parse_type("supertype", sup)?;
    let oracle_answer = if oracle {
        Some(siso_subtype_oracle(&t, &u).map_err(|e| InputError::Invalid(format!("--oracle: {e}")))?)
    } else {
        None
    };
    let verdict = subtype_with(&t, &u, &BTreeSet::new(), SubtypeOptions { fuel, max_pairs });
    let mut text = format!("{}\n", verdict.name());
    if let Some(o) = oracle_answer {
        let _ = writeln!(text, "oracle: {o}");
    }
    if explain {
        text.push_str(&verdict.explain());
    }
    let mut json = json!({
        "command": "subtype",
        "sub": t.to_string(),
        "sup": u.to_string(),
        "verdict": verdict.name(),
        "proven": verdict.is_proven(),
        "oracle": oracle_answer,
    });
    if explain {
        json["explanation"] = serde_json::to_value(&verdict).unwrap_or(Json::Null);
    }
    Ok(Report { ok: verdict.is_proven(), text, json })
}

/// Picks the global type to project and projects it.
fn select_projection(prog: &Program, role: &str, global: Option<&str>) -> Result<(String, Result<SessionType, String>), InputError> {
    let name = match global {
        Some(g) => g.to_string(),
        None => {
            let declared = prog.participant(role).and_then(|d| match &d.ty {
                mpstc_core::TypeRef::Projection { global, .. } => Some(global.clone()),
                mpstc_core::TypeRef::Local(_) => None,
            });
            match declared {
                Some(g) => g,
                None if prog.globals.len() == 1 => prog.globals.keys().next().cloned().unwrap_or_default(),
                None => return Err(InputError::Invalid("several global types are declared; choose one with --global".into())),
            }
        }
    };
    let g = prog.globals.get(&name).ok_or_else(|| InputError::Invalid(format!("no global type named {name}")))?;
    Ok((name, project(g, &Participant::new(role)).map_err(|e| e.to_string())))
}

/// `mpstc project`.
pub fn project_file(file: &Path, role: &str, global: Option<&str>) -> Result<Report, InputError> {
    let prog = load(file)?;
    let (name, projected) = select_projection(&prog, role, global)?;
    Ok(match projected {
        Ok(t) => Report {
            ok: true,
            text: format!("{t}\n"),
            json: json!({ "command": "project", "global": name, "role": role, "ok": true, "type": t.to_string() }),
        },
        Err(e) => Report {
            ok: false,
            text: format!("projection of {name} onto {role} is undefined: {e}\n"),
            json: json!({ "command": "project", "global": name, "role": role, "ok": false, "error": e }),
        },
    })
}

/// `mpstc run`.
pub fn run(file: &Path, scheduler: Scheduler, max_steps: usize, trace: Option<&Path>) -> Result<Report, InputError> {
    let prog = load(file)?;
    let session = mpstc_core::Session::from_program(&prog).map_err(|e| InputError::Invalid(e.to_string()))?;
    let outcome = run_session(&session, scheduler, max_steps);
    if let Some(path) = trace {
        let write_err = |source| InputError::Write { path: path.display().to_string(), source };
        let mut out = BufWriter::new(fs::File::create(path).map_err(write_err)?);
        for entry in &outcome.trace {
            writeln!(out, "{}", entry.to_json()).map_err(write_err)?;
        }
        out.flush().map_err(write_err)?;
    }
    let steps = outcome.trace.len();
    let mut text = format!("verdict: {} after {steps} steps\n", outcome.verdict.name());
    let mut results = serde_json::Map::new();
    let mut blocked = serde_json::Map::new();
    match &outcome.verdict {
        Verdict::Completed(values) => {
            for (p, v) in values {
                let _ = writeln!(text, "  {p} returned {v}");
                results.insert(p.to_string(), v.to_json());
            }
        }
        Verdict::Running(s) | Verdict::Stuck(s) => {
            for (p, c) in &s.roles {
                let _ = writeln!(text, "  {p}: {c}");
                blocked.insert(p.to_string(), Json::String(c.to_string()));
            }
        }
    }
    let live = &outcome.liveness;
    let _ = writeln!(
        text,
        "liveness: longest blocked receive {} steps (bound {}), {}",
        live.max_recv_wait,
        live.bound,
        if live.within_bound { "within bound" } else { "exceeds bound" }
    );
    let ok = matches!(outcome.verdict, Verdict::Completed(_));
    Ok(Report {
        ok,
        text,
        json: json!({
            "command": "run",
            "verdict": outcome.verdict.name(),
            "steps": steps,
            "results": results,
            "residual": blocked,
            "liveness": live,
        }),
    })
}

struct Role {
    config: Configuration,
    declared: SessionType,
}

fn role(prog: &Program, name: &str, file: &Path) -> Result<Role, InputError> {
    let d = prog.participant(name).ok_or_else(|| InputError::Invalid(format!("{}: no participant named {name}", file.display())))?;
    let declared = resolve_type(prog, &d.ty).map_err(|e| InputError::Invalid(format!("{}: {e}", file.display())))?;
    Ok(Role { config: Configuration::new(d.body.clone()), declared })
}

/// `mpstc denote`.
pub fn denote(file: &Path, name: &str, probes: &ProbeConfig, fuel: usize) -> Result<Report, InputError> {
    let prog = load(file)?;
    let r = role(&prog, name, file)?;
    Ok(match denote_computation(&r.config.comp, Some(&r.declared), fuel) {
        Ok((tree, result, _)) => {
            let rendered = tree.render(probes);
            Report {
                ok: true,
                text: format!("{rendered}\n"),
                json: json!({
                    "command": "denote",
                    "role": name,
                    "type": r.declared.to_string(),
                    "result": result.to_string(),
                    "depth": probes.depth,
                    "int_probes": probes.int_probes,
                    "tree": rendered,
                }),
            }
        }
        Err(e) => Report {
            ok: false,
            text: format!("{name} does not check at {}: {e}\n", r.declared),
            json: json!({ "command": "denote", "role": name, "type": r.declared.to_string(), "error": e.to_string() }),
        },
    })
}

fn typed_at(c: &Configuration, ty: &SessionType, fuel: usize) -> Result<(), String> {
    let b = infer_computation(&TypingContexts::with_fuel(fuel), &c.comp).map_err(|e| e.to_string())?.ground;
    type_configuration(c, b, ty, fuel).map(|_| ()).map_err(|e| e.to_string())
}

/// `mpstc bisim`.
pub fn bisim(file_a: &Path, a: &str, file_b: &Path, b: &str, at: &str, probes: &ProbeConfig, fuel: usize) -> Result<Report, InputError> {
    let ty = parse_type("--at", at)?;
    let ra = role(&load(file_a)?, a, file_a)?;
    let rb = role(&load(file_b)?, b, file_b)?;
    for (name, r) in [(a, &ra), (b, &rb)] {
        if let Err(e) = typed_at(&r.config, &ty, fuel) {
            return Ok(Report {
                ok: false,
                text: format!("{name} does not check at {ty}: {e}\n"),
                json: json!({ "command": "bisim", "at": ty.to_string(), "bisimilar": Json::Null, "error": format!("{name}: {e}") }),
            });
        }
    }
    let bisimilar = bisim_bounded(BisimSide::Config(ra.config), BisimSide::Config(rb.config), &ty, probes, fuel);
    Ok(Report {
        ok: bisimilar,
        text: format!("{}\n", if bisimilar { "bisimilar" } else { "not bisimilar" }),
        json: json!({ "command": "bisim", "at": ty.to_string(), "depth": probes.depth, "int_probes": probes.int_probes, "bisimilar": bisimilar }),
    })
}

/// `mpstc equiv`: succeeds when denotational equality and bisimilarity
/// agree.
pub fn equiv(file_a: &Path, a: &str, file_b: &Path, b: &str, at: &str, probes: &ProbeConfig, fuel: usize) -> Result<Report, InputError> {
    let ty = parse_type("--at", at)?;
    let ra = role(&load(file_a)?, a, file_a)?;
    let rb = role(&load(file_b)?, b, file_b)?;
    Ok(match adequacy_check(&ra.config, &rb.config, &ty, probes, fuel) {
        Ok(adq) => Report {
            ok: adq.consistent,
            text: format!(
                "equal denotations: {}\nbisimilar: {}\nconsistent: {}\n",
                adq.equal_denotations, adq.bisimilar, adq.consistent
            ),
            json: json!({
                "command": "equiv",
                "at": ty.to_string(),
                "depth": probes.depth,
                "int_probes": probes.int_probes,
                "equal_denotations": adq.equal_denotations,
                "bisimilar": adq.bisimilar,
                "consistent": adq.consistent,
            }),
        },
        Err(e) => Report {
            ok: false,
            text: format!("not typable at {ty}: {e}\n"),
            json: json!({ "command": "equiv", "at": ty.to_string(), "error": e.to_string() }),
        },
    })
}
