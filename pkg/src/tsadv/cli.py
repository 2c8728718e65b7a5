"""Configuration-driven command line for reproducible experiments.

Subcommands: ``gen-data``, ``train``, ``attack``, ``probe``,
``grid-search``. Every command is a pure function of the effective
configuration (defaults, overlaid by the ``--config`` JSON file, overlaid
by flags), so reruns produce byte-identical output files. Output CSVs
start with a comment line recording the configuration hash and seed.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import multiprocessing
import os
import sys

from . import attacks, baselines, data, models, sensitivity, training
from .constraints import ConstraintSet, DecaySpec, build_scales, unit_scales
from .errors import ConfigError, DataError, NumericError

DEFAULT_CONFIG = {
    "seed": 7,
    "out_dir": "out",
    "checkpoint": None,  # model file read by attack/probe; written by train
    "data": {
        "source": "synthetic",
        "csv_dir": None,
        "n_days": 900,
        "slots_per_day": 13,
        "seed": None,  # None -> run seed
        "test_fraction": 1.0 / 7.0,
        "same_day_slots": False,
        "base_volume": 0.25,
        "season_amp": 0.1,
        "day_phi": 0.4,
        "day_sigma": 0.075,
        "slot_phi": 0.4,
        "slot_sigma": 0.0375,
        "price_start": 7.0,
        "price_sigma": 0.01,
        "envelope_sigma": 0.005,
    },
    "model": {
        "family": "linear",
        "hidden": [16],
        "width": 16,
        "heads": 1,
    },
    "train": {
        "mode": "asat",
        "epochs": 5,
        "batch_size": 32,
        "learning_rate": 0.001,
        "decay": {"kind": "exp", "gamma": 0.7},
        "attack": {"p": "linf", "epsilon": 0.02, "steps": 3, "step_size": None},
    },
    "eval_attack": {
        "p": "l2",
        "epsilon": 0.2,
        "steps": 3,
        "step_size": None,
        "decay": None,  # None -> unit scales at evaluation
    },
    "sweep": {
        "epsilons": [0.05, 0.1, 0.2, 0.5],
        "norms": ["l2", "linf"],
        "steps": 3,
        "decay": None,
    },
    "probe": {
        "epsilon": 1.0,
        "grid_points": 9,
        "instance": None,  # optional index for a single-instance report
    },
    "grid": {
        "epsilons": [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0],
        "gammas": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95],
        "norms": ["l2", "linf"],
        "workers": None,  # None -> available cores
    },
}


def _merge(defaults, override, path=""):
    """Strict deep merge; unknown keys are configuration errors."""
    merged = dict(defaults)
    for key, value in override.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(defaults[key], dict) and isinstance(value, dict):
            merged[key] = _merge(defaults[key], value, path + key + ".")
        else:
            merged[key] = value
    return merged


def load_config(path: str | None, *, seed: int | None = None, out_dir: str | None = None) -> dict:
    override = {}
    if path is not None:
        if not os.path.exists(path):
            raise DataError(f"config file not found: {path}")
        with open(path, "r", encoding="utf-8") as f:
            try:
                override = json.load(f)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    config = _merge(DEFAULT_CONFIG, override)
    if seed is not None:
        config["seed"] = seed
    if out_dir is not None:
        config["out_dir"] = out_dir
    return config


def config_hash(config: dict) -> str:
    """Hash of the experiment-defining fields.

    Execution plumbing (output location, worker count) is excluded so that
    reruns of the same experiment produce identical output bytes wherever
    and however they run.
    """
    payload = {k: (dict(v) if isinstance(v, dict) else v) for k, v in config.items()}
    payload.pop("out_dir", None)
    payload.get("grid", {}).pop("workers", None)
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def _stamp(config: dict) -> str:
    return f"config_sha256={config_hash(config)} seed={config['seed']}"


# -- dataset / model assembly ------------------------------------------------


def build_dataset(config: dict) -> data.SplitDataset:
    dcfg = config["data"]
    if dcfg["source"] == "csv":
        if not dcfg["csv_dir"]:
            raise ConfigError("data.source='csv' requires data.csv_dir")
        splits = {}
        for name in ("train", "dev", "test"):
            path = os.path.join(dcfg["csv_dir"], f"{name}.csv")
            if not os.path.exists(path):
                raise DataError(f"data file not found: {path}")
            splits[name] = data.load_csv(path)
        return data.SplitDataset(**splits)
    if dcfg["source"] != "synthetic":
        raise ConfigError(f"unknown data source {dcfg['source']!r}")
    seed = config["seed"] if dcfg["seed"] is None else dcfg["seed"]
    raw = data.generate_synthetic(
        dcfg["n_days"],
        dcfg["slots_per_day"],
        seed,
        base_volume=dcfg["base_volume"],
        season_amp=dcfg["season_amp"],
        day_phi=dcfg["day_phi"],
        day_sigma=dcfg["day_sigma"],
        slot_phi=dcfg["slot_phi"],
        slot_sigma=dcfg["slot_sigma"],
        price_start=dcfg["price_start"],
        price_sigma=dcfg["price_sigma"],
        envelope_sigma=dcfg["envelope_sigma"],
    )
    instances, _ = data.build_instances(raw, same_day_slots=dcfg["same_day_slots"])
    return data.split(instances, seed, test_fraction=dcfg["test_fraction"])


def build_arch(config: dict, input_dim: int) -> models.Arch:
    mcfg = config["model"]
    return models.Arch(
        input_dim=input_dim,
        hidden=tuple(mcfg["hidden"]),
        width=mcfg["width"],
        heads=mcfg["heads"],
    )


def _decay_from(cfg: dict | None, horizon_T: int) -> DecaySpec | None:
    if cfg is None:
        return None
    return DecaySpec(kind=cfg["kind"], gamma=cfg["gamma"], horizon_T=horizon_T)


def _attack_from(cfg: dict, k: int, scales=None) -> attacks.AttackConfig:
    constraint = ConstraintSet(
        cfg["p"], float(cfg["epsilon"]), unit_scales(k) if scales is None else scales
    )
    return attacks.AttackConfig(
        constraint=constraint, steps_K=cfg["steps"], step_size_tau=cfg["step_size"]
    )


def build_train_config(config: dict, dataset: data.SplitDataset, *, decay_kind=None, mode=None, attack_p=None, attack_eps=None, gamma=None) -> training.TrainConfig:
    tcfg = config["train"]
    decay_cfg = dict(tcfg["decay"])
    if decay_kind is not None:
        decay_cfg["kind"] = decay_kind
    if gamma is not None:
        decay_cfg["gamma"] = gamma
    attack_cfg = dict(tcfg["attack"])
    if attack_p is not None:
        attack_cfg["p"] = attack_p
    if attack_eps is not None:
        attack_cfg["epsilon"] = attack_eps
    return training.TrainConfig(
        epochs=tcfg["epochs"],
        batch_size=tcfg["batch_size"],
        learning_rate=tcfg["learning_rate"],
        seed=config["seed"],
        mode=tcfg["mode"] if mode is None else mode,
        attack=_attack_from(attack_cfg, dataset.k),
        decay=_decay_from(decay_cfg, dataset.horizon_T),
    )


def run_training(config: dict, dataset: data.SplitDataset, cfg: training.TrainConfig):
    """Train per config, fill in test metrics; returns (model, report)."""
    model = models.init_model(
        config["model"]["family"], build_arch(config, dataset.k), config["seed"]
    )
    if cfg.mode == training.ASAT:
        trained, report = training.train_asat(model, dataset.train, dataset.dev, cfg)
    else:
        trained, report = training.train_plain(model, dataset.train, dataset.dev, cfg)
    pairs = [
        (trained.predict(inst.features), inst.target, inst.x_last) for inst in dataset.test
    ]
    report.test_metrics = baselines.compute_metrics(pairs)
    return trained, report


# -- commands ----------------------------------------------------------------


def cmd_gen_data(config: dict) -> list[str]:
    out = config["out_dir"]
    os.makedirs(out, exist_ok=True)
    dataset = build_dataset(config)
    stamp = _stamp(config)
    written = []
    for name, instances in (("train", dataset.train), ("dev", dataset.dev), ("test", dataset.test)):
        path = os.path.join(out, f"{name}.csv")
        data.save_csv(instances, path, comment=stamp)
        written.append(path)
    meta = {
        "config_sha256": config_hash(config),
        "seed": config["seed"],
        "k": dataset.k,
        "horizon_T": dataset.horizon_T,
        "n_train": len(dataset.train),
        "n_dev": len(dataset.dev),
        "n_test": len(dataset.test),
    }
    meta_path = os.path.join(out, "metadata.json")
    with open(meta_path, "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")
    written.append(meta_path)
    return written


def _train_once(config: dict, dataset, suffix: str = "", decay_kind=None) -> list[str]:
    out = config["out_dir"]
    cfg = build_train_config(config, dataset, decay_kind=decay_kind)
    model, report = run_training(config, dataset, cfg)
    stamp = _stamp(config) + (f" decay={decay_kind}" if decay_kind else "")
    model_path = os.path.join(out, f"model{suffix}.txt")
    report_path = os.path.join(out, f"train_report{suffix}.txt")
    models.save_model(model, model_path)
    training.write_train_report(report, report_path, comment=stamp)
    return [model_path, report_path]


def cmd_train(config: dict, *, decay_sweep: bool = False) -> list[str]:
    os.makedirs(config["out_dir"], exist_ok=True)
    dataset = build_dataset(config)
    if not decay_sweep:
        return _train_once(config, dataset)
    written = []
    for kind in ("const", "exp", "linear"):
        written += _train_once(config, dataset, suffix=f"_{kind}", decay_kind=kind)
    return written


def _load_checkpoint(config: dict) -> models.Model:
    path = config["checkpoint"]
    if not path:
        raise ConfigError("this command requires a 'checkpoint' path in the config")
    if not os.path.exists(path):
        raise DataError(f"checkpoint not found: {path}")
    return models.load_model(path)


def cmd_attack(config: dict) -> list[str]:
    out = config["out_dir"]
    os.makedirs(out, exist_ok=True)
    dataset = build_dataset(config)
    model = _load_checkpoint(config)
    scfg = config["sweep"]
    decay = _decay_from(scfg["decay"], dataset.horizon_T)
    scales_by_norm = None
    gamma = 1.0
    if decay is not None:
        ranks = dataset.test[0].ranks if dataset.test else data.default_ranks()
        scales = build_scales(decay, ranks)
        scales_by_norm = {p: scales for p in scfg["norms"]}
        gamma = decay.gamma
    rows = attacks.robustness_sweep_rows(
        model,
        dataset.test,
        scfg["epsilons"],
        scfg["norms"],
        steps_K=scfg["steps"],
        scales_by_norm=scales_by_norm,
        gamma=gamma,
    )
    path = os.path.join(out, "robustness.csv")
    attacks.write_sweep_csv(rows, path, comment=_stamp(config))
    return [path]


def cmd_probe(config: dict) -> list[str]:
    out = config["out_dir"]
    os.makedirs(out, exist_ok=True)
    dataset = build_dataset(config)
    model = _load_checkpoint(config)
    pcfg = config["probe"]
    written = []
    report = sensitivity.full_report(
        model, dataset.test, epsilon=pcfg["epsilon"], grid_points=pcfg["grid_points"]
    )
    path = os.path.join(out, "sensitivity.csv")
    sensitivity.write_sensitivity_csv(report, path, comment=_stamp(config))
    written.append(path)
    if pcfg["instance"] is not None:
        idx = pcfg["instance"]
        if not 0 <= idx < len(dataset.test):
            raise IndexError(f"probe.instance {idx} out of range (test size {len(dataset.test)})")
        single = sensitivity.full_report(
            model, dataset.test[idx], epsilon=pcfg["epsilon"], grid_points=pcfg["grid_points"]
        )
        spath = os.path.join(out, "sensitivity_instance.csv")
        sensitivity.write_sensitivity_csv(single, spath, comment=_stamp(config))
        written.append(spath)
    return written


_GRID_CONTEXT: dict = {}


def _grid_init(config: dict) -> None:
    _GRID_CONTEXT["config"] = config
    _GRID_CONTEXT["dataset"] = build_dataset(config)


def _grid_cell(cell: tuple[float, float, str]):
    eps, gamma, p = cell
    config = _GRID_CONTEXT["config"]
    dataset = _GRID_CONTEXT["dataset"]
    cfg = build_train_config(
        config, dataset, mode=training.ASAT, attack_p=p, attack_eps=eps, gamma=gamma
    )
    _, report = run_training(config, dataset, cfg)
    dev_mse = min(report.dev_losses)
    m = report.test_metrics
    return (eps, gamma, p, dev_mse, m.mse, m.acc)


GRID_COLUMNS = "epsilon,gamma,p,dev_mse,test_mse,test_acc"


def cmd_grid_search(config: dict) -> list[str]:
    out = config["out_dir"]
    os.makedirs(out, exist_ok=True)
    gcfg = config["grid"]
    cells = [
        (float(eps), float(gamma), p)
        for eps in gcfg["epsilons"]
        for gamma in gcfg["gammas"]
        for p in gcfg["norms"]
    ]
    workers = gcfg["workers"] or os.cpu_count() or 1
    if workers > 1 and len(cells) > 1:
        with multiprocessing.Pool(workers, initializer=_grid_init, initargs=(config,)) as pool:
            results = pool.map(_grid_cell, cells)
    else:
        _grid_init(config)
        results = [_grid_cell(c) for c in cells]
    results.sort(key=lambda r: r[3])  # stable: ties stay in grid order
    path = os.path.join(out, "grid.csv")
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# {_stamp(config)}\n")
        f.write(GRID_COLUMNS + "\n")
        for eps, gamma, p, dev_mse, test_mse, test_acc in results:
            f.write(
                f"{repr(eps)},{repr(gamma)},{p},{repr(dev_mse)},"
                f"{repr(test_mse)},{repr(test_acc)}\n"
            )
    return [path]


# -- entry point ---------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsadv", description="scaled adversarial training experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("gen-data", "train", "attack", "probe", "grid-search"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the run seed")
        p.add_argument("--out", default=None, help="override the output directory")
        if name == "train":
            p.add_argument(
                "--decay-sweep",
                action="store_true",
                help="train once per decay kind (const, exp, linear) with a shared seed",
            )
    return parser


def run(argv=None) -> list[str]:
    args = _build_parser().parse_args(argv)
    config = load_config(args.config, seed=args.seed, out_dir=args.out)
    if args.command == "gen-data":
        return cmd_gen_data(config)
    if args.command == "train":
        return cmd_train(config, decay_sweep=args.decay_sweep)
    if args.command == "attack":
        return cmd_attack(config)
    if args.command == "probe":
        return cmd_probe(config)
    return cmd_grid_search(config)


def main(argv=None) -> int:
    try:
        for path in run(argv):
            print(path)
        return 0
    except (ConfigError, ValueError, IndexError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
