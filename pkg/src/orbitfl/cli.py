"""Command-line front end.

Subcommands::

    orbitfl run       --config run.ini [--out metrics.csv] [--protocol fedisl]
    orbitfl compare   --config run.ini [--out summary.csv]
    orbitfl contacts  --config run.ini [--out windows.csv] [--horizon-hours 12]
    orbitfl validate  --config run.ini

Scenarios are INI files; every key is optional except the seed, which may come
from --seed, the ORBITFL_SEED environment variable, or ``[sim] seed``, in that
order of precedence. Angles in config files are degrees. Results are CSV on
stdout or at --out.

Exit codes: 0 success, 1 bad configuration, 2 runtime failure, 3 simulation
proved unable to make progress.
"""

from __future__ import annotations

import argparse
import configparser
import os
import re
import sys
from dataclasses import replace

from .sim import (
    ConfigError,
    DeadlockError,
    MetricsRecord,
    ScenarioConfig,
    compare,
    contact_table,
    run_scenario,
    validate_scenario,
)

SEED_ENV_VAR = "ORBITFL_SEED"

RUN_HEADER = (
    "sim_time_s,epoch,test_accuracy,test_loss,ps_down_msgs,ps_down_bits,"
    "ps_up_msgs,ps_up_bits,isl_msgs,isl_bits,fallback_hops,epoch_duration_s"
)
COMPARE_HEADER = "speedup,traffic_ratio"
CONTACTS_HEADER = "satellite,plane,start_s,end_s"


def _int(text: str) -> int:
    return int(text, 10)


def _float(text: str) -> float:
    return float(text)


def _opt_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none") else float(text)


def _str(text: str) -> str:
    return text.strip()


# (section, key) -> (ScenarioConfig field, converter)
CONFIG_SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "constellation": {
        "num_planes": ("num_planes", _int),
        "sats_per_plane": ("sats_per_plane", _int),
        "altitude_km": ("altitude_km", _float),
        "inclination_deg": ("inclination_deg", _float),
        "phasing_factor": ("phasing_factor", _int),
    },
    "ps": {
        "kind": ("ps_kind", _str),
        "altitude_km": ("ps_altitude_km", _float),
        "inclination_deg": ("ps_inclination_deg", _float),
        "raan_deg": ("ps_raan_deg", _float),
        "latitude_deg": ("ps_latitude_deg", _float),
        "longitude_deg": ("ps_longitude_deg", _float),
        "min_elevation_deg": ("ps_min_elevation_deg", _float),
    },
    "link": {
        "bandwidth_hz": ("bandwidth_hz", _float),
        "tx_power_dbm": ("tx_power_dbm", _float),
        "antenna_gain_dbi": ("antenna_gain_dbi", _float),
        "carrier_hz": ("carrier_hz", _float),
        "noise_temperature_k": ("noise_temperature_k", _float),
        "tx_delay_s": ("tx_delay_s", _float),
        "rx_delay_s": ("rx_delay_s", _float),
    },
    "learning": {
        "learning_rate": ("learning_rate", _float),
        "local_iterations": ("local_iterations", _int),
        "cycles_per_sample": ("cycles_per_sample", _float),
        "cpu_hz": ("cpu_hz", _float),
        "compute_time_factor": ("compute_time_factor", _float),
    },
    "data": {
        "source": ("data_source", _str),
        "scheme": ("data_scheme", _str),
        "samples_per_satellite": ("samples_per_satellite", _int),
        "test_samples": ("test_samples", _int),
        "num_features": ("num_features", _int),
        "num_classes": ("num_classes", _int),
        "separation": ("separation", _float),
        "train_images_path": ("train_images_path", _str),
        "train_labels_path": ("train_labels_path", _str),
        "test_images_path": ("test_images_path", _str),
        "test_labels_path": ("test_labels_path", _str),
    },
    "protocol": {
        "reconnect_wait_s": ("reconnect_wait_s", _float),
        "grace_factor": ("grace_factor", _float),
        "contact_step_s": ("contact_step_s", _float),
        "contact_tol_s": ("contact_tol_s", _float),
        "contact_horizon_s": ("contact_horizon_s", _float),
    },
    "sim": {
        "seed": ("seed", _int),
        "until_epochs": ("until_epochs", _int),
        "time_limit_s": ("time_limit_s", _opt_float),
        "target_accuracy": ("target_accuracy", _opt_float),
    },
}


def _key_line(path: str, section: str, key: str) -> int | None:
    """Best-effort line number of ``key`` inside ``[section]``."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError:
        return None
    current = None
    pattern = re.compile(rf"^\s*{re.escape(key)}\s*[=:]")
    for number, line in enumerate(lines, start=1):
        header = re.match(r"^\s*\[(.+?)\]", line)
        if header:
            current = header.group(1).strip()
        elif current == section and pattern.match(line):
            return number
    return None


def _where(path: str, section: str, key: str) -> str:
    line = _key_line(path, section, key)
    suffix = f" (line {line})" if line is not None else ""
    return f"[{section}] {key} in {path}{suffix}"


def parse_config(path: str, seed_override: int | None = None) -> ScenarioConfig:
    """Read an INI scenario file into a ScenarioConfig.

    Unknown sections or keys are errors, as are unparseable values; messages
    carry the offending key and its line. ``seed_override`` takes precedence
    over ``[sim] seed``; one of the two must provide a seed.
    """
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc

    fields: dict[str, object] = {}
    for section in parser.sections():
        if section not in CONFIG_SCHEMA:
            known = ", ".join(sorted(CONFIG_SCHEMA))
            raise ConfigError(
                f"unknown section [{section}] in {path}; expected one of: {known}"
            )
        for key, raw in parser.items(section):
            try:
                field, convert = CONFIG_SCHEMA[section][key]
            except KeyError:
                raise ConfigError(f"unknown key {_where(path, section, key)}") from None
            try:
                fields[field] = convert(raw)
            except ValueError:
                raise ConfigError(
                    f"bad value {raw!r} for {_where(path, section, key)}"
                ) from None

    if seed_override is not None:
        fields["seed"] = seed_override
    if "seed" not in fields:
        raise ConfigError(
            f"no seed: set [sim] seed in {path}, pass --seed, or export {SEED_ENV_VAR}"
        )
    seed = fields.pop("seed")
    return replace(ScenarioConfig(seed=seed), **fields)


def emit_config(cfg: ScenarioConfig) -> str:
    """Render a scenario as canonical INI text; parse_config reads it back."""
    out = []
    for section, keys in CONFIG_SCHEMA.items():
        out.append(f"[{section}]")
        for key, (field, _) in keys.items():
            value = getattr(cfg, field)
            if value is None or value == "":
                continue
            if isinstance(value, float):
                value = repr(value)
            out.append(f"{key} = {value}")
        out.append("")
    return "\n".join(out)


# -- CSV rendering ------------------------------------------------------------


def _cell(value) -> str:
    if isinstance(value, bool):
        raise TypeError("no boolean cells in any schema")
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def render_run_csv(records: list[MetricsRecord], seed: int) -> str:
    lines = [f"# seed={seed}", RUN_HEADER]
    for r in records:
        lines.append(
            ",".join(
                _cell(v)
                for v in (
                    r.sim_time_s,
                    r.epoch,
                    r.test_accuracy,
                    r.test_loss,
                    r.ps_down_msgs,
                    r.ps_down_bits,
                    r.ps_up_msgs,
                    r.ps_up_bits,
                    r.isl_msgs,
                    r.isl_bits,
                    r.fallback_hops,
                    r.epoch_duration_s,
                )
            )
        )
    return "\n".join(lines) + "\n"


def render_compare_csv(speedup: float, traffic_ratio: float, seed: int) -> str:
    row = ",".join((_cell(speedup), _cell(traffic_ratio)))
    return f"# seed={seed}\n{COMPARE_HEADER}\n{row}\n"


def render_contacts_csv(rows) -> str:
    lines = [CONTACTS_HEADER]
    for sat, plane, start, end in rows:
        lines.append(f"{sat},{plane},{_cell(start)},{_cell(end)}")
    return "\n".join(lines) + "\n"


def _deliver(text: str, out_path: str | None):
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


# -- argument handling -----------------------------------------------------------


def _resolve_seed(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env, 10)
        except ValueError:
            raise ConfigError(
                f"{SEED_ENV_VAR} must be an integer, got {env!r}"
            ) from None
    return None


def _load_scenario(args) -> ScenarioConfig:
    seed = _resolve_seed(args)
    if args.config is not None:
        return parse_config(args.config, seed_override=seed)
    if seed is None:
        raise ConfigError(
            f"no seed: pass --seed, export {SEED_ENV_VAR}, or use --config"
        )
    return ScenarioConfig(seed=seed)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orbitfl",
        description="simulate federated learning over a satellite constellation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="scenario INI file (defaults apply without it)")
        p.add_argument("--out", help="write CSV here instead of stdout")
        p.add_argument("--seed", type=int, help="override the scenario seed")

    p_run = sub.add_parser("run", help="simulate one protocol, emit per-epoch metrics")
    common(p_run)
    p_run.add_argument(
        "--protocol",
        choices=("fedisl", "fednonisl"),
        default="fedisl",
        help="which transport to simulate (default fedisl)",
    )

    p_cmp = sub.add_parser("compare", help="run both protocols, emit speedup summary")
    common(p_cmp)

    p_con = sub.add_parser("contacts", help="list server visibility windows")
    common(p_con)
    p_con.add_argument(
        "--horizon-hours",
        type=float,
        default=12.0,
        help="how far ahead to search (default 12)",
    )

    p_val = sub.add_parser("validate", help="check a scenario file and report problems")
    p_val.add_argument("--config", required=True, help="scenario INI file")
    p_val.add_argument("--seed", type=int, help="override the scenario seed")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            cfg = parse_config(args.config, seed_override=_resolve_seed(args))
            problems = validate_scenario(cfg)
            for problem in problems:
                print(problem)
            if problems:
                return 1
            print("ok")
            return 0

        cfg = _load_scenario(args)
        if args.command == "run":
            result = run_scenario(cfg, args.protocol)
            _deliver(render_run_csv(result.records, cfg.seed), args.out)
        elif args.command == "compare":
            outcome = compare(cfg)
            _deliver(
                render_compare_csv(outcome.speedup, outcome.traffic_ratio, cfg.seed),
                args.out,
            )
        elif args.command == "contacts":
            rows = contact_table(cfg, args.horizon_hours * 3600.0)
            _deliver(render_contacts_csv(rows), args.out)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DeadlockError as exc:
        print(f"stuck: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - the CLI boundary maps everything
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
