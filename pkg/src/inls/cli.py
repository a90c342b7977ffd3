"""Command-line driver.

    inls [--config FILE] [--out DIR] [--seed N] [--threads N] COMMAND

Commands: check, ground-state, classify, evolve, sweep, report.  Exit status is
0 on success, 1 when a check or run fails, 2 for bad input (configuration,
missing files, violated preconditions).
"""
from __future__ import annotations

import argparse
import configparser
import csv
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dichotomy as dc
from . import evolution as ev
from . import functionals as fn
from . import groundstate as gsm
from .grid import Field, RadialGrid, radial_grid, read_snapshot
from .interaction import (PRESETS, InteractionPotential, Monomial, SystemSpec, check_hypotheses,
                          scalar_quadratic)

log = logging.getLogger("inls")

ALL_PRESETS = dict(PRESETS, scalar_quadratic=scalar_quadratic)
_PRESET_KEYS = {"two_wave": ("kappa", "beta_t"), "three_wave_a": ("beta_t", "beta_t1"),
                "three_wave_b": ("beta_t", "beta_t1"), "scalar_quadratic": ("beta",)}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    spec: SystemSpec
    N: int = 4096
    r_max: float = 40.0
    omega: float = 1.0
    gs_opts: gsm.GroundStateOptions = field(default_factory=gsm.GroundStateOptions)
    gs_file: str | None = None
    ev_opts: ev.EvolveOptions = field(default_factory=ev.EvolveOptions)
    initial: str = "groundstate"
    c: float = 1.0
    amplitude: float = 1.0
    width: float = 1.0
    q_tol: float = 1e-6
    e_tol: float = 1e-4
    R: float | None = None
    c_list: tuple = ()
    omegas: tuple = ()
    samples: int = 1000
    out: str = "inls-out"
    seed: int = 0
    threads: int = 1


def _floats(text):
    text = text.strip()
    if not text:
        return ()
    return tuple(float(v) for v in text.replace(";", ",").split(","))


def _parse_terms(text, l):
    """One term per line: coeff; z powers; conj powers, e.g. ``1.0; 0,1; 2,0``.
    The coefficient may be a complex literal or a ``re, im`` pair."""
    terms = []
    for line in text.strip().splitlines():
        line = line.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(";")]
        if len(parts) != 3:
            raise ConfigError(f"bad F term {line!r}: expected 'coeff; zpow; cpow'")
        try:
            c = parts[0].replace(" ", "")
            coeff = complex(*map(float, c.split(","))) if "," in c else complex(c)
            zp = tuple(int(v) for v in parts[1].split(","))
            cp = tuple(int(v) for v in parts[2].split(","))
        except ValueError as exc:
            raise ConfigError(f"bad F term {line!r}: {exc}") from None
        terms.append(Monomial(coeff, zp, cp))
    if not terms:
        raise ConfigError("inline system needs at least one F term")
    return InteractionPotential(l, tuple(terms))


def _system(sec):
    preset = sec.get("preset", "two_wave").strip()
    n = sec.getint("n", 3)
    b = sec.getfloat("b", 0.6 if preset != "scalar_quadratic" else 0.5)
    if preset == "inline":
        try:
            alpha = _floats(sec["alpha"])
            l = len(alpha)
            F = _parse_terms(sec["F"], l)
            return SystemSpec(n, b, alpha, _floats(sec["gamma"]), _floats(sec.get("beta", ",".join(["0"] * l))),
                              _floats(sec["sigma"]), F)
        except KeyError as exc:
            raise ConfigError(f"inline system misses key {exc}") from None
    if preset not in ALL_PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; known: {', '.join(sorted(ALL_PRESETS))}")
    kw = {k: sec.getfloat(k) for k in _PRESET_KEYS[preset] if k in sec}
    spec = ALL_PRESETS[preset](n=n, b=b, **kw)
    over = {k: _floats(sec[k]) for k in ("alpha", "gamma", "beta", "sigma") if k in sec}
    return spec.with_(**over) if over else spec


def load_config(path=None, overrides=None) -> RunConfig:
    """Read an INI file (sections system, grid, groundstate, evolve, dichotomy,
    check, output); missing sections take defaults."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
    for s in ("system", "grid", "groundstate", "evolve", "dichotomy", "check", "output"):
        if not cp.has_section(s):
            cp.add_section(s)
    try:
        spec = _system(cp["system"])
        g, gsec, esec, dsec = cp["grid"], cp["groundstate"], cp["evolve"], cp["dichotomy"]
        gs_opts = gsm.GroundStateOptions(
            max_iterations=gsec.getint("max_iterations", 2000), tol=gsec.getfloat("tol", 1e-8),
            stabilizer_tol=gsec.getfloat("stabilizer_tol", 1e-10), damping=gsec.getfloat("damping", 0.8),
            amplitude=_floats(gsec.get("amplitude", "1")) or 1.0, width=_floats(gsec.get("width", "1")) or 1.0)
        ev_opts = ev.EvolveOptions(
            dt=esec.getfloat("dt", 1e-4), T=esec.getfloat("T", 1.0), monitor_stride=esec.getint("monitor_stride", 10),
            substeps=esec.getint("substeps", 1), K_factor=esec.getfloat("K_factor", 100.0),
            tail_fraction=esec.getfloat("tail_fraction", 0.1), splitting=esec.get("splitting", "NLN"))
        cfg = RunConfig(
            spec=spec, N=g.getint("N", 4096), r_max=g.getfloat("r_max", 40.0),
            omega=gsec.getfloat("omega", 1.0), gs_opts=gs_opts, gs_file=gsec.get("file"),
            ev_opts=ev_opts, initial=esec.get("initial", "groundstate"), c=esec.getfloat("c", 1.0),
            amplitude=esec.getfloat("amplitude", 1.0), width=esec.getfloat("width", 1.0),
            q_tol=esec.getfloat("q_tol", 1e-6), e_tol=esec.getfloat("e_tol", 1e-4),
            R=dsec.getfloat("R") if "R" in dsec else None, c_list=_floats(dsec.get("c_list", "")),
            omegas=_floats(gsec.get("omegas", "")), samples=cp["check"].getint("samples", 1000),
            out=cp["output"].get("dir", "inls-out"), seed=cp["check"].getint("seed", 0))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    if cfg.initial not in ("groundstate", "gaussian"):
        raise ConfigError("evolve.initial must be 'groundstate' or 'gaussian'")
    for k, v in (overrides or {}).items():
        if v is not None:
            setattr(cfg, k, v)
    return cfg


# --- helpers ---------------------------------------------------------------

def _write(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _grid(cfg) -> RadialGrid:
    return radial_grid(cfg.spec.n, cfg.N, cfg.r_max, cfg.spec.b)


def reference_groundstate(cfg):
    """Ground state at omega = 1 with all beta_k = 0 (threshold reference)."""
    ref = cfg.spec.with_(beta=(0.0,) * cfg.spec.l)
    if cfg.gs_file:
        try:
            psi = read_snapshot(cfg.gs_file, cfg.spec.b)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read ground-state file: {exc}") from None
        g = psi.grid
        if not isinstance(g, RadialGrid) or g.n != ref.n or psi.l != ref.l:
            raise ConfigError("ground-state file does not match the system")
        if (g.N, g.r_max) != (cfg.N, cfg.r_max):
            raise ConfigError("ground-state file grid differs from the configured grid")
        rep = fn.full_report(ref, psi, 1.0)
        res = gsm.GroundStateResult(psi, 1.0, fn.frequency_masses(ref, 1.0), 0, np.zeros(ref.l), 1.0, rep,
                                    fn.pohozaev_residuals(ref, psi, 1.0))
    else:
        res = gsm.solve(ref, 1.0, _grid(cfg), cfg.gs_opts)
    cert = gsm.certify(ref, res, cfg.gs_opts.tol)
    if not cert.passed:
        bad = ", ".join(k for k, (ok, _) in cert.items.items() if not ok)
        raise ConfigError(f"reference ground state is not certified ({bad})")
    return ref, res


def _initial(cfg, gs):
    if cfg.initial == "groundstate":
        return Field(gs.psi.grid, cfg.c * gs.psi.data)
    g = _grid(cfg)
    prof = cfg.amplitude * np.exp(-(g.r / cfg.width) ** 2)
    return Field(g, np.repeat(prof[None], cfg.spec.l, axis=0))


def _run_one(cfg, ref, gs, th, c=None, trace_path=None):
    """Classify and evolve one initial datum; returns (classification, trace, status, message)."""
    if c is not None:
        cfg = _copy(cfg, c=c, initial="groundstate")
    u0 = _initial(cfg, gs)
    cl = dc.classify(cfg.spec, u0, th, radial=True)
    cut = dc.build_cutoff(u0.grid.tuned(cfg.spec.b), cfg.R, strict=False)
    tr = ev.evolve(cfg.spec, u0, cfg.ev_opts, observers=[dc.virial_observer(cfg.spec, cut)])
    if trace_path:
        tr.to_csv(trace_path)
    status, msg = 0, "clean completion"
    qd, ed = tr.drift("Q"), tr.drift("E")
    if not np.isfinite(qd) or qd > cfg.q_tol:
        status, msg = 1, f"charge drift {qd:.3e} exceeds {cfg.q_tol:.1e}"
    elif tr.flag.fired and cl.verdict.startswith("Global"):
        status, msg = 1, f"blow-up flag ({tr.flag.reason}) under verdict {cl.verdict}"
    elif tr.flag.fired:
        msg = f"blow-up detected at t={tr.flag.time!r} ({tr.flag.reason})"
    elif not np.isfinite(ed) or ed > cfg.e_tol:
        status, msg = 1, f"energy drift {ed:.3e} exceeds {cfg.e_tol:.1e}"
    return cl, tr, status, msg


def _copy(cfg, **kw):
    d = dict(cfg.__dict__)
    d.update(kw)
    return RunConfig(**d)


# --- commands --------------------------------------------------------------

def cmd_check(cfg) -> int:
    rep = check_hypotheses(cfg.spec, sample_count=cfg.samples, seed=cfg.seed)
    _write(os.path.join(cfg.out, "hypotheses.txt"), rep.to_text())
    print(rep.to_text(), end="")
    return 0 if rep.passed else 1


def cmd_ground_state(cfg) -> int:
    try:
        fn.frequency_masses(cfg.spec, cfg.omega)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        gs = gsm.solve(cfg.spec, cfg.omega, _grid(cfg), cfg.gs_opts)
    except gsm.GroundStateError as exc:
        path = os.path.join(cfg.out, "residual_history.csv")
        _write(path, "iteration,residual\n" + "".join(f"{i + 1},{r!r}\n" for i, r in enumerate(exc.history)))
        print(f"ground state failed: {exc.reason}; history in {path}")
        return 1
    gs.save(os.path.join(cfg.out, "groundstate.bin"))
    cert = gsm.certify(cfg.spec, gs, cfg.gs_opts.tol)
    _write(os.path.join(cfg.out, "certification.txt"), cert.to_text())
    print(gs.to_text() + cert.to_text(), end="")
    return 0 if cert.passed else 1


def cmd_classify(cfg) -> int:
    ref, gs = reference_groundstate(cfg)
    th = fn.thresholds_from_groundstate(ref, gs)
    cl = dc.classify(cfg.spec, _initial(cfg, gs), th, radial=True)
    _write(os.path.join(cfg.out, "classification.txt"), cl.to_text())
    print(cl.to_text(), end="")
    return 0


def cmd_evolve(cfg) -> int:
    ref, gs = reference_groundstate(cfg)
    th = fn.thresholds_from_groundstate(ref, gs)
    u0 = _initial(cfg, gs)
    cl = dc.classify(cfg.spec, u0, th, radial=True)
    _write(os.path.join(cfg.out, "classification.txt"), cl.to_text())
    cl, tr, status, msg = _run_one(cfg, ref, gs, th, trace_path=os.path.join(cfg.out, "trace.csv"))
    drift = f"Q_drift={tr.drift('Q')!r}\nE_drift={tr.drift('E')!r}\nstatus={msg}\n"
    _write(os.path.join(cfg.out, "evolve.txt"), drift)
    print(cl.to_text() + drift, end="")
    return status


def cmd_sweep(cfg) -> int:
    ref, gs = reference_groundstate(cfg)
    th = fn.thresholds_from_groundstate(ref, gs)
    rowdir = os.path.join(cfg.out, "sweep")
    os.makedirs(rowdir, exist_ok=True)

    def row(c):
        try:
            cl, tr, status, msg = _run_one(cfg, ref, gs, th, c=c, trace_path=os.path.join(rowdir, f"trace_c{c!r}.csv"))
        except Exception as exc:   # recorded inline, the sweep goes on
            return [repr(c), "error", "", "", "none", str(exc)]
        ft = repr(tr.flag.time) if tr.flag.fired else "none"
        return [repr(c), cl.verdict, repr(cl.energy_margin), repr(cl.kinetic_margin), ft, msg]

    with ThreadPoolExecutor(max_workers=max(1, cfg.threads)) as pool:
        rows = list(pool.map(row, cfg.c_list))
    path = os.path.join(cfg.out, "sweep.csv")
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["c", "verdict", "energy_margin", "kinetic_margin", "flag_time", "status"])
        w.writerows(rows)
    os.replace(tmp, path)
    for r in rows:
        print(",".join(r))
    return 0


def cmd_report(cfg) -> int:
    ref, gs = reference_groundstate(cfg)
    th = fn.thresholds_from_groundstate(ref, gs)
    cut = dc.build_cutoff(gs.psi.grid, cfg.R, strict=False)
    text = "[thresholds]\n" + th.to_text() + "[groundstate]\n" + gs.report.to_text() + "[cutoff]\n" + cut.to_text()
    _write(os.path.join(cfg.out, "report.txt"), text)
    if cfg.omegas:
        rows = gsm.omega_sweep(cfg.spec, cfg.omegas, _grid(cfg), cfg.gs_opts)
        _write(os.path.join(cfg.out, "omega_sweep.csv"),
               "omega,Qw,xi1,status\n" + "".join(
                   f"{r[0]!r},{r[1]!r},{r[2]!r},{r[3] if len(r) > 3 else 'ok'}\n" for r in rows))
    print(text, end="")
    return 0


COMMANDS = {"check": cmd_check, "ground-state": cmd_ground_state, "classify": cmd_classify,
            "evolve": cmd_evolve, "sweep": cmd_sweep, "report": cmd_report}


def _common(p, default=None):
    p.add_argument("--config", default=default, help="INI configuration file")
    p.add_argument("--out", default=default, help="output directory (overrides [output] dir)")
    p.add_argument("--seed", type=int, default=default, help="sampling seed")
    p.add_argument("--threads", type=int, default=default,
                   help="worker threads for sweeps (default: $INLS_THREADS or 1)")


def _parser():
    p = argparse.ArgumentParser(prog="inls", description=__doc__.splitlines()[0])
    _common(p)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        # flags may also follow the command; SUPPRESS keeps earlier values
        _common(sub.add_parser(name), argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    threads = args.threads
    if threads is None and os.environ.get("INLS_THREADS"):
        try:
            threads = int(os.environ["INLS_THREADS"])
        except ValueError:
            print("inls: INLS_THREADS must be an integer", file=sys.stderr)
            return 2
    try:
        cfg = load_config(args.config, {"out": args.out, "seed": args.seed, "threads": threads})
        os.makedirs(cfg.out, exist_ok=True)
    except (ConfigError, OSError) as exc:
        print(f"inls: {exc}", file=sys.stderr)
        return 2
    handler = logging.FileHandler(os.path.join(cfg.out, "run.log"))
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    log.info("command %s config %s", args.command, args.config)
    try:
        code = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"inls: {exc}", file=sys.stderr)
        code = 2
    except gsm.GroundStateError as exc:
        print(f"inls: reference ground state failed: {exc.reason}", file=sys.stderr)
        code = 1
    finally:
        log.removeHandler(handler)
        handler.close()
    log.info("exit %d", code)
    return code


if __name__ == "__main__":
    sys.exit(main())
