"""Command-line entry point: ``oculodec <subcommand> ...``.

Every subcommand writes its outputs plus a ``provenance.json`` (tool
version, seed, config hash) into an output directory, and refuses to
replace outputs produced from a different configuration unless
``--force`` is given.  The default output directory is taken from
``$OCULODEC_OUT`` when set, else ``./oculodec-out``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import warnings
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .io import provenance, read_epochs, read_session, write_epochs, write_session

log = logging.getLogger("oculodec")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNKNOWN_STAGE = 3
EXIT_ORDER = 4
EXIT_MISSING_INPUT = 5
EXIT_STAGE_FAILED = 6
EXIT_REFUSE_OVERWRITE = 7

OUT_ENV = "OCULODEC_OUT"

# pipeline stages and their rank in the processing order
STAGE_RANK = {"synth": 0, "load": 0, "preprocess": 1, "ts_car": 2, "downsample": 3,
              "epoch": 4, "eval": 5, "report": 6}
STAGE_ALIASES = {"artifacts": "ts_car", "tscar": "ts_car", "resample": "downsample"}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def default_out() -> Path:
    return Path(os.environ.get(OUT_ENV, "oculodec-out"))


def _claim_outdir(outdir: Path, config: dict, seed, force: bool) -> dict:
    """Create ``outdir`` and write provenance, refusing to mix configurations."""
    outdir.mkdir(parents=True, exist_ok=True)
    prov = provenance(config, seed)
    prov_path = outdir / "provenance.json"
    if prov_path.exists() and not force:
        try:
            old = json.loads(prov_path.read_text())
        except json.JSONDecodeError:
            old = {}
        if old.get("config_hash") != prov["config_hash"]:
            raise CliError(EXIT_REFUSE_OVERWRITE,
                           f"{outdir} holds outputs of config {old.get('config_hash')}; "
                           f"this run is {prov['config_hash']}. Use --force to overwrite.")
    prov_path.write_text(json.dumps({**prov, "config": config}, indent=1, sort_keys=True,
                                    default=str) + "\n")
    return prov


def _need(path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise CliError(EXIT_MISSING_INPUT, f"missing {what}: {p}")
    return p


def load_config_file(path) -> dict:
    p = _need(path, "config file")
    text = p.read_text()
    try:
        if p.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            return tomllib.loads(text)
        return json.loads(text)
    except Exception as exc:
        raise CliError(EXIT_CONFIG, f"cannot parse {p}: {exc}") from exc


# ---------------------------------------------------------------- subcommands

def cmd_synth(a) -> None:
    from .synthgen import GenConfig, generate_session, write_ground_truth

    base = load_config_file(a.config) if a.config else {}
    try:
        cfg = GenConfig.from_dict({**base, **{k: v for k, v in
                                              (("seed", a.seed), ("task", a.task),
                                               ("n_runs", a.runs),
                                               ("n_trials_per_direction", a.trials),
                                               ("fs_neural", a.fs)) if v is not None}})
    except (TypeError, ValueError) as exc:
        raise CliError(EXIT_CONFIG, f"invalid generator config: {exc}") from exc
    out = Path(a.out)
    _claim_outdir(out, cfg.to_dict(), cfg.seed, a.force)
    session, truth = generate_session(cfg)
    write_session(session, out / "session")
    write_ground_truth(truth, out / "truth.json")
    print(out / "session")


def cmd_preprocess(a) -> None:
    from .preprocess import preprocess, resample

    session = read_session(_need(a.session, "session directory"))
    config = {"stage": "preprocess", "input": str(a.session), "highpass": a.highpass,
              "notch": a.notch, "lowpass": a.lowpass, "resample": a.resample}
    out = Path(a.out)
    _claim_outdir(out, config, session.seed, a.force)
    sig = preprocess(session.neural, a.highpass or None, a.notch or None, a.lowpass)
    if a.resample:
        sig = resample(sig, a.resample)
    write_session(replace(session, neural=sig), out / "session")


def cmd_artifacts(a) -> None:
    from .artifacts import detect_r_peaks, ts_car
    from .preprocess import resample

    session = read_session(_need(a.session, "session directory"))
    config = {"stage": "artifacts", "input": str(a.session), "window_ms": a.window_ms,
              "exclude": a.exclude, "threshold_mads": a.threshold, "resample": a.resample}
    out = Path(a.out)
    _claim_outdir(out, config, session.seed, a.force)
    sig = session.neural.drop(a.exclude) if a.exclude else session.neural
    peaks = detect_r_peaks(sig, a.threshold)
    sig = ts_car(sig, peaks, a.window_ms)
    if a.resample:
        sig = resample(sig, a.resample)
    with open(out / "r_peaks.csv", "w") as fh:
        fh.write("t\n" + "".join(f"{t!r}\n" for t in peaks.times.tolist()))
    write_session(replace(session, neural=sig), out / "session")


def cmd_ica(a) -> None:
    from .decompose import UnmixingModel, apply_unmixing, group_ica_fit

    if a.action == "fit":
        sessions = [read_session(_need(p, "session directory")) for p in a.sessions]
        config = {"stage": "ica-fit", "inputs": list(map(str, a.sessions)), "k": a.k, "seed": a.seed}
        out = Path(a.out)
        _claim_outdir(out, config, a.seed, a.force)
        model = group_ica_fit(sessions, a.k, a.seed)
        if not model.converged:
            log.warning("FastICA stopped after %d iterations without converging", model.n_iter)
        model.save(out / "unmixing.json")
    else:
        model = UnmixingModel.load(_need(a.model, "model file"))
        session = read_session(_need(a.session, "session directory"))
        out = Path(a.out)
        _claim_outdir(out, {"stage": "ica-apply", "model": str(a.model), "input": str(a.session)},
                      session.seed, a.force)
        src = apply_unmixing(model, session.neural)
        write_session(replace(session, neural=src.as_signal()), out / "session")


def cmd_xdawn(a) -> None:
    from .decompose import UnmixingModel, apply_to_epochs, xdawn_fit

    epochs = read_epochs(_need(a.epochs, "epoch directory"))
    out = Path(a.out)
    if a.action == "fit":
        _claim_outdir(out, {"stage": "xdawn-fit", "input": str(a.epochs), "n": a.n_components},
                      None, a.force)
        xdawn_fit(epochs, a.n_components).save(out / "xdawn.json")
    else:
        model = UnmixingModel.load(_need(a.model, "model file"))
        _claim_outdir(out, {"stage": "xdawn-apply", "model": str(a.model), "input": str(a.epochs)},
                      None, a.force)
        write_epochs(apply_to_epochs(model, epochs), out / "epochs")


def cmd_epoch(a) -> None:
    from .core import Epoch, Klass, TrialLabel
    from .epoching import WINDOWS
    from .evaluate import (PipelineConfig, PreparedSession, build_dataset, fixation_intervals,
                           session_events)

    session = read_session(_need(a.session, "session directory"))
    config = {"stage": "epoch", "input": str(a.session), "role": a.role, "interval": a.interval,
              "source": a.source}
    out = Path(a.out)
    _claim_outdir(out, config, session.seed, a.force)
    cfg = PipelineConfig(onset_source=a.source)
    events, labels = session_events(session, cfg)
    prep = PreparedSession(session.neural, events, labels, session.runs,
                           fixation_intervals(session), session.task, session.session_id)
    ds = build_dataset(prep, a.role, a.interval)
    t0 = -WINDOWS[a.interval][0]
    epochs = [Epoch(x, t0, ds.fs,
                    TrialLabel(Klass.SACCADE, d, a.role, True, r) if k else
                    TrialLabel(Klass.FIXATION, run_index=r))
              for x, k, d, r in zip(ds.X, ds.klass, ds.direction, ds.run)]
    write_epochs(epochs, out / "epochs")
    with open(out / "events.csv", "w") as fh:
        fh.write("onset_s,offset_s,direction,role,valid,run,wait_s\n")
        for ev, lab in zip(events, labels):
            fh.write(f"{ev.onset_s!r},{ev.offset_s!r},{lab.direction.value},{lab.role.value},"
                     f"{int(lab.valid)},{ev.run_index},{ev.wait_time_s!r}\n")


def cmd_features(a) -> None:
    from .features import (band_features_array, band_schema, time_features_array, time_schema,
                           write_features_csv)

    epochs = read_epochs(_need(a.epochs, "epoch directory"))
    out = Path(a.out)
    _claim_outdir(out, {"stage": "features", "input": str(a.epochs), "kind": a.kind}, None, a.force)
    X = np.stack([e.data for e in epochs])
    fs = epochs[0].fs
    ids = [f"c{i}" for i in range(X.shape[2])]
    parts, schema = [], []
    if a.kind in ("time", "both"):
        parts.append(time_features_array(X, fs))
        schema += time_schema(X.shape[1], fs, ids)
    if a.kind in ("band", "both"):
        parts.append(band_features_array(X, fs))
        schema += band_schema(ids)
    if a.kind == "raw":
        parts.append(X.reshape(len(X), -1))
        schema += [f"c{c}:t{t}" for t in range(X.shape[1]) for c in range(X.shape[2])]
    labels = [e.label.direction.value if a.target == "direction" and e.label.direction
              else e.label.klass.value for e in epochs]
    F = np.hstack(parts)
    write_features_csv(out / "features.csv", np.column_stack([F, [e.label.run_index for e in epochs]]),
                       list(schema) + ["run"], labels)


def cmd_analyze(a) -> None:
    from .analysis import compute_erp, morlet_spectrogram, r2_spectrum, write_matrix_csv
    from .core import Klass

    epochs = read_epochs(_need(a.epochs, "epoch directory"))
    out = Path(a.out)
    _claim_outdir(out, {"stage": f"analyze-{a.what}", "input": str(a.epochs),
                        "smooth": a.smooth_hz, "channel": a.channel,
                        "fmin": a.fmin, "fmax": a.fmax, "df": a.df}, None, a.force)
    sac = [e for e in epochs if e.label.klass == Klass.SACCADE]
    fix = [e for e in epochs if e.label.klass == Klass.FIXATION]
    if a.what == "erp":
        erp = compute_erp(sac or epochs, a.smooth_hz or None)
        write_matrix_csv(out / "erp.csv", erp.mean, erp.times, [f"c{i}" for i in range(erp.mean.shape[1])], "t")
    elif a.what == "r2":
        if not sac or not fix:
            raise CliError(EXIT_MISSING_INPUT, "r² needs both saccade and fixation epochs")
        spec = r2_spectrum(sac, fix)
        write_matrix_csv(out / "r2.csv", spec.r2, [f"c{i}" for i in range(spec.r2.shape[0])],
                         spec.freqs, "channel")
    else:
        sg = morlet_spectrogram(sac or epochs, a.fmin, a.fmax, a.df, channel=a.channel,
                                baseline="epoch" if a.baseline == "epoch" else None)
        write_matrix_csv(out / "spectrogram.csv", sg.power_db, sg.freqs, sg.times, "freq")
    _try_svg(out, a.what)


def _try_svg(out: Path, what: str) -> None:
    """Best-effort plot; CSV outputs are the contract."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except Exception:
        return
    try:
        with open(out / f"{what}.csv") as fh:
            rows = list(csv.reader(fh))
        M = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
        fig, ax = plt.subplots(figsize=(6, 3.5))
        if what == "erp":
            ax.plot([float(r[0]) for r in rows[1:]], M)
        else:
            ax.imshow(M, aspect="auto", origin="lower")
        fig.savefig(out / f"{what}.svg")
        plt.close(fig)
    except Exception as exc:  # plots never fail a run
        log.debug("plot skipped: %s", exc)


def _read_features(path):
    with open(_need(path, "features file")) as fh:
        rows = list(csv.reader(fh))
    head = rows[0]
    run_col, label_col = head.index("run"), head.index("label")
    keep = [i for i in range(len(head)) if i not in (run_col, label_col)]
    X = np.array([[float(r[i]) for i in keep] for r in rows[1:]])
    runs = np.array([int(float(r[run_col])) for r in rows[1:]])
    y = np.array([r[label_col] for r in rows[1:]])
    return X, y, runs, [head[i] for i in keep]


def cmd_train(a) -> None:
    from .classify import ClassifierSpec, default_grid, grid_search, train
    from .evaluate import make_loro
    from .features import MinMaxScaler

    kinds = {"rf": "random_forest", "knn": "knn", "logistic": "logistic", "lda": "lda"}
    X, y, runs, schema = _read_features(a.features)
    out = Path(a.out)
    config = {"stage": "train", "input": str(a.features), "clf": a.clf, "grid": a.grid,
              "seed": a.seed, "n_estimators": a.n_estimators, "max_depth": a.max_depth}
    _claim_outdir(out, config, a.seed, a.force)
    scaler = MinMaxScaler.fit(X, schema)
    Xs = scaler.transform(X)
    spec = ClassifierSpec(kinds[a.clf], n_estimators=a.n_estimators, max_depth=a.max_depth, seed=a.seed)
    if a.grid == "default" and a.clf == "rf":
        res = grid_search(default_grid(a.seed), Xs, y, make_loro(runs).splits(runs))
        spec = res.best
        with open(out / "grid.csv", "w") as fh:
            fh.write("n_estimators,max_depth,mean_auc,fold_aucs\n")
            for row in res.table:
                s = row["spec"]
                fh.write(f"{s.n_estimators},{s.max_depth},{row['mean_auc']!r},"
                         f"{';'.join(repr(v) for v in row['fold_aucs'])}\n")
    train(spec, Xs, y, schema).save(out / "model.json")
    scaler.save(out / "scaler.json")


def _pipeline_from_args(a):
    from .evaluate import INTERVALS, ROLES, PipelineConfig

    base = PipelineConfig.from_dict(load_config_file(a.config)) if a.config else PipelineConfig()
    roles = ROLES if a.roles == "all" else tuple(a.roles.split(","))
    intervals = INTERVALS if a.intervals == "all" else tuple(a.intervals.split(","))
    return replace(base, roles=roles, intervals=intervals)


def cmd_eval(a) -> None:
    from .evaluate import run_protocol

    sessions = [read_session(_need(p, "session directory")) for p in a.sessions]
    cfg = _pipeline_from_args(a)
    out = Path(a.out)
    config = {"stage": "eval", "inputs": list(map(str, a.sessions)), "protocol": a.protocol,
              "pipeline": cfg.to_dict()}
    prov = _claim_outdir(out, config, cfg.classifier.seed, a.force)
    report = run_protocol(sessions, cfg, a.protocol)
    report.write(out, {"provenance": prov})


def cmd_report(a) -> None:
    from .evaluate import EvalReport

    src = _need(a.report, "report.json")
    report = EvalReport.from_json(json.loads(src.read_text()))
    out = Path(a.out)
    _claim_outdir(out, {"stage": "report", "input": str(src)}, None, a.force)
    write_summary(report, out / "summary.csv")


def write_summary(report, path) -> Path:
    """Mean AUC per (protocol, role, comparison, interval) across sessions."""
    groups: dict = {}
    for r in report.rows:
        groups.setdefault((r.task, r.protocol, r.role, r.comparison, r.interval), []).append(r.mean_auc)
    with open(path, "w") as fh:
        fh.write("task,protocol,role,comparison,interval,mean_auc,n_sessions\n")
        for k in sorted(groups):
            v = groups[k]
            fh.write(",".join(k) + f",{float(np.mean(v))!r},{len(v)}\n")
    return Path(path)


# ---------------------------------------------------------------- pipeline

def normalise_stages(stages) -> list[dict]:
    """Validate names and order; raises CliError with the stage at fault."""
    out = []
    last = -1
    prev = None
    for i, st in enumerate(stages):
        if isinstance(st, str):
            st = {"name": st}
        if not isinstance(st, dict) or "name" not in st:
            raise CliError(EXIT_CONFIG, f"stage {i} must be a table with a 'name'")
        name = STAGE_ALIASES.get(st["name"], st["name"])
        if name not in STAGE_RANK:
            raise CliError(EXIT_UNKNOWN_STAGE,
                           f"stage {i}: unknown stage {st['name']!r}; known: {sorted(STAGE_RANK)}")
        rank = STAGE_RANK[name]
        if rank <= last:
            raise CliError(EXIT_ORDER,
                           f"stage {i}: {name!r} cannot follow {prev!r}; required order is "
                           "synth|load, preprocess, ts_car, downsample, epoch, eval, report")
        last, prev = rank, name
        out.append({**st, "name": name})
    if not out or STAGE_RANK[out[0]["name"]] != 0:
        raise CliError(EXIT_MISSING_INPUT, "pipeline must start with a synth or load stage")
    return out


def run_pipeline(config: dict, outdir: Optional[Path] = None, force: bool = False) -> Path:
    """Execute a stage list held in memory; returns the output directory."""
    from .artifacts import detect_r_peaks, ts_car
    from .core import Task
    from .evaluate import PipelineConfig, run_protocol, session_events, wait_time_stats
    from .preprocess import preprocess, resample
    from .synthgen import GenConfig, generate_session

    if not isinstance(config, dict) or "stages" not in config:
        raise CliError(EXIT_CONFIG, "pipeline config needs a 'stages' list")
    stages = normalise_stages(config["stages"])
    seed = int(config.get("seed", 0))
    outdir = Path(outdir or config.get("out") or default_out())
    prov = _claim_outdir(outdir, config, seed, force)

    sessions = []
    eval_cfg = PipelineConfig(highpass_hz=None, notch_hz=None, ts_car=False, target_fs=None)
    report = None
    for st in stages:
        name = st["name"]
        params = {k: v for k, v in st.items() if k != "name"}
        try:
            if name == "synth":
                n_sessions = int(params.pop("sessions", 2))
                gen = GenConfig.from_dict({"seed": seed, **params})
                first, truth = generate_session(replace(gen, session_id=gen.session_id or "S1"))
                sessions = [first]
                mixing = tuple(map(tuple, truth.mixing))
                for k in range(1, n_sessions):
                    s, _ = generate_session(replace(gen, seed=gen.seed + k, mixing=mixing,
                                                    session_id=f"S{k + 1}"))
                    sessions.append(s)
            elif name == "load":
                paths = params.get("sessions", [])
                if not paths:
                    raise CliError(EXIT_MISSING_INPUT, "load stage lists no sessions")
                sessions = [read_session(_need(p, "session directory")) for p in paths]
            elif name == "preprocess":
                sessions = [replace(s, neural=preprocess(s.neural, params.get("highpass", 0.5),
                                                         params.get("notch", 50.0),
                                                         params.get("lowpass")))
                            for s in sessions]
            elif name == "ts_car":
                new = []
                with open(outdir / "r_peaks.csv", "w") as fh:
                    fh.write("session,t\n")
                    for s in sessions:
                        sig = s.neural.drop(params["exclude"]) if params.get("exclude") else s.neural
                        peaks = detect_r_peaks(sig, params.get("threshold_mads", 4.0))
                        fh.write("".join(f"{s.session_id},{t!r}\n" for t in peaks.times.tolist()))
                        new.append(replace(s, neural=ts_car(sig, peaks, params.get("window_ms", 130.0))))
                sessions = new
            elif name == "downsample":
                fs = float(params.get("fs", 64.0))
                sessions = [replace(s, neural=resample(s.neural, fs)) for s in sessions]
            elif name == "epoch":
                eval_cfg = replace(eval_cfg, **{k: (tuple(v) if isinstance(v, list) else v)
                                                for k, v in params.items()
                                                if k in ("roles", "intervals", "comparisons",
                                                         "onset_source", "target_eccentricity_cm")})
            elif name == "eval":
                opts = dict(params)
                protocol = opts.pop("protocol", "both")
                if "classifier" in opts and isinstance(opts["classifier"], dict):
                    opts["classifier"] = {"kind": "random_forest", "seed": seed, **opts["classifier"]}
                eval_cfg = PipelineConfig.from_dict({**eval_cfg.to_dict(), **opts})
                if len(sessions) < 2 and protocol != "within":
                    protocol = "within"
                report = run_protocol(sessions, eval_cfg, protocol)
                report.write(outdir, {"provenance": prov})
            elif name == "report":
                if report is None:
                    raise CliError(EXIT_MISSING_INPUT, "report stage needs a preceding eval stage")
                write_summary(report, outdir / "summary.csv")
                for s in sessions:
                    if s.task == Task.VISUALLY_GUIDED:
                        events, _ = session_events(s, eval_cfg)
                        ws = wait_time_stats(events)
                        ws.write_histogram(outdir / f"wait_hist_{s.session_id}.csv")
                        (outdir / f"wait_{s.session_id}.txt").write_text(ws.summary() + "\n")
        except CliError:
            raise
        except Exception as exc:
            raise CliError(EXIT_STAGE_FAILED, f"stage {name!r} failed: {exc}") from exc
    return outdir


def cmd_pipeline(a) -> None:
    config = load_config_file(a.config)
    run_pipeline(config, Path(a.out) if a.out else None, a.force)


# ---------------------------------------------------------------- argument parsing

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oculodec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"oculodec {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("--out", type=Path, default=None,
                        help=f"output directory (default ${OUT_ENV} or ./oculodec-out)")
        sp.add_argument("--force", action="store_true", help="overwrite outputs of another config")
        return sp

    sp = common(sub.add_parser("synth", help="generate a synthetic session"))
    sp.add_argument("--config", help="generator config (JSON or TOML)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--task", choices=["free_viewing", "visually_guided"])
    sp.add_argument("--runs", type=int)
    sp.add_argument("--trials", type=int, help="trials per direction over the session")
    sp.add_argument("--fs", type=float, help="neural sampling rate")
    sp.set_defaults(func=cmd_synth)

    sp = common(sub.add_parser("preprocess", help="highpass, notch, optional lowpass/resample"))
    sp.add_argument("--session", required=True)
    sp.add_argument("--highpass", type=float, default=0.5)
    sp.add_argument("--notch", type=float, default=50.0)
    sp.add_argument("--lowpass", type=float)
    sp.add_argument("--resample", type=float)
    sp.set_defaults(func=cmd_preprocess)

    sp = common(sub.add_parser("artifacts", help="R-peak detection and TS-CAR"))
    sp.add_argument("--session", required=True)
    sp.add_argument("--window-ms", type=float, default=130.0)
    sp.add_argument("--threshold", type=float, default=4.0, help="robust SDs above the median")
    sp.add_argument("--exclude", nargs="*", default=[], help="channels to drop first")
    sp.add_argument("--resample", type=float)
    sp.set_defaults(func=cmd_artifacts)

    sp = common(sub.add_parser("ica", help="group FastICA"))
    sp.add_argument("action", choices=["fit", "apply"])
    sp.add_argument("--sessions", nargs="*", default=[])
    sp.add_argument("--session")
    sp.add_argument("--model")
    sp.add_argument("--k", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_ica)

    sp = common(sub.add_parser("xdawn", help="xDAWN spatial filters"))
    sp.add_argument("action", choices=["fit", "apply"])
    sp.add_argument("--epochs", required=True)
    sp.add_argument("--model")
    sp.add_argument("--n-components", type=int, default=2)
    sp.set_defaults(func=cmd_xdawn)

    sp = common(sub.add_parser("epoch", help="label saccades and cut epochs"))
    sp.add_argument("--session", required=True)
    sp.add_argument("--role", choices=["initial", "back", "combined"], default="combined")
    sp.add_argument("--interval", choices=["pre", "post", "pre+post", "full"], default="pre+post")
    sp.add_argument("--source", choices=["gaze", "markers"], default="gaze")
    sp.set_defaults(func=cmd_epoch)

    sp = common(sub.add_parser("features", help="time/band/raw feature table"))
    sp.add_argument("--epochs", required=True)
    sp.add_argument("--kind", choices=["time", "band", "both", "raw"], default="both")
    sp.add_argument("--target", choices=["klass", "direction"], default="klass")
    sp.set_defaults(func=cmd_features)

    sp = common(sub.add_parser("analyze", help="ERP, r² spectrum or spectrogram"))
    sp.add_argument("what", choices=["erp", "r2", "spectrogram"])
    sp.add_argument("--epochs", required=True)
    sp.add_argument("--smooth-hz", type=float, default=15.0)
    sp.add_argument("--channel", type=int, default=0)
    sp.add_argument("--baseline", choices=["epoch", "none"], default="epoch")
    sp.add_argument("--fmin", type=float, default=1.0, help="spectrogram lowest frequency")
    sp.add_argument("--fmax", type=float, default=30.0)
    sp.add_argument("--df", type=float, default=0.1)
    sp.set_defaults(func=cmd_analyze)

    sp = common(sub.add_parser("train", help="fit a classifier on a feature table"))
    sp.add_argument("--features", required=True)
    sp.add_argument("--clf", choices=["rf", "knn", "logistic", "lda"], default="rf")
    sp.add_argument("--grid", choices=["default", "none"], default="none")
    sp.add_argument("--n-estimators", type=int, default=100)
    sp.add_argument("--max-depth", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_train)

    sp = common(sub.add_parser("eval", help="within/cross-session decoding report"))
    sp.add_argument("--sessions", nargs="+", required=True)
    sp.add_argument("--protocol", choices=["within", "cross", "both"], default="within")
    sp.add_argument("--roles", default="all", help="'all' or comma list")
    sp.add_argument("--intervals", default="all", help="'all' or comma list")
    sp.add_argument("--config", help="pipeline options (JSON or TOML)")
    sp.set_defaults(func=cmd_eval)

    sp = common(sub.add_parser("report", help="summarise a report.json"))
    sp.add_argument("--report", required=True)
    sp.set_defaults(func=cmd_report)

    sp = common(sub.add_parser("pipeline", help="run a JSON/TOML stage list"))
    sp.add_argument("--config", required=True)
    sp.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if a.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    if getattr(a, "out", None) is None and a.cmd != "pipeline":
        a.out = default_out()
    try:
        with warnings.catch_warnings():
            if not a.verbose:
                warnings.simplefilter("ignore")
            a.func(a)
    except CliError as exc:
        print(f"oculodec {a.cmd}: {exc}", file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        print(f"oculodec {a.cmd}: missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except Exception as exc:
        print(f"oculodec {a.cmd}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_STAGE_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
