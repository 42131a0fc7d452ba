"""Command-line entry point: ``pcfmatch <subcommand> ...``.

Every subcommand that writes a results file stamps it with the config hash
and the package version; wall-clock data go to ``<results>.meta.json`` so the
results file itself is byte-identical across reruns.  Failures print one JSON
object ``{"error": <category>, "message": ..., "problems": [...]}`` on stderr
and exit with the category's code.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import pathlib
import platform
import sys
import tempfile
import time
import traceback
from concurrent.futures import ThreadPoolExecutor

from . import __version__, conjecture, convergence, descent, mitm
from .config import ConfigError, RunConfig, tomllib
from .lhs import lhs_space_size, parse_formula
from .pcf import PcfDefinition

RESULTS_SCHEMA_VERSION = 1

EXIT_CODES = {
    "config": 2,
    "input": 3,
    "table_format": 4,
    "constant_mismatch": 5,
    "template": 6,
    "integrity": 7,
    "internal": 70,
}


class CliError(Exception):
    def __init__(self, category: str, message: str, problems: list[str] | None = None):
        super().__init__(message)
        self.category = category
        self.problems = problems or []


# -- config handling -------------------------------------------------------------


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _apply_set(data: dict, assignment: str) -> None:
    key, eq, value = assignment.partition("=")
    if not eq:
        raise CliError("config", f"--set expects key=value, got {assignment!r}")
    node = data
    parts = key.strip().split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise CliError("config", f"--set: {key!r} is not a table")
    node[parts[-1]] = _parse_value(value.strip())


def load_config(args) -> RunConfig:
    data: dict = {}
    if getattr(args, "config", None):
        path = pathlib.Path(args.config)
        try:
            text = path.read_text()
            data = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
        except OSError as exc:
            raise CliError("input", f"cannot read config: {exc}") from exc
        except (ValueError, tomllib.TOMLDecodeError) as exc:
            raise CliError("config", f"cannot parse config: {exc}") from exc
    if getattr(args, "constant", None):
        data["constants"] = list(args.constant)
    if getattr(args, "fingerprint_length", None) is not None:
        data["fingerprint_length"] = args.fingerprint_length
    if getattr(args, "ladder", None):
        data["ladder"] = [int(x) for x in args.ladder.split(",")]
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    if getattr(args, "verify_digits", None) is not None:
        data["verify_digits"] = args.verify_digits
    if getattr(args, "threads", None) is not None:
        data["threads"] = args.threads
    for assignment in getattr(args, "set", None) or ():
        _apply_set(data, assignment)
    try:
        return RunConfig.from_mapping(data)
    except ConfigError as exc:
        raise CliError("config", "invalid configuration", exc.problems) from exc
    except (TypeError, ValueError) as exc:
        raise CliError("config", str(exc), [str(exc)]) from exc


# -- output ------------------------------------------------------------------------


def _atomic_write(path, text: str) -> None:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _dump(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def results_payload(command: str, cfg: RunConfig | None, conjectures, stats: dict | None = None,
                    extra: dict | None = None) -> dict:
    payload = {
        "schema_version": RESULTS_SCHEMA_VERSION,
        "code_version": __version__,
        "command": command,
        "config_hash": cfg.hash() if cfg else None,
        "config": _config_for_results(cfg) if cfg else None,
        "stats": stats or {},
        "conjectures": [c.to_json() for c in conjectures],
    }
    payload.update(extra or {})
    return payload


def _config_for_results(cfg: RunConfig) -> dict:
    data = cfg.to_json()
    data.pop("threads")
    data.pop("output")
    return data


def write_results(path, payload: dict, started: float, threads: int | None) -> None:
    _atomic_write(path, _dump(payload))
    finished = time.time()
    meta = {
        "results": pathlib.Path(path).name,
        "started": _dt.datetime.fromtimestamp(started, _dt.timezone.utc).isoformat(),
        "finished": _dt.datetime.fromtimestamp(finished, _dt.timezone.utc).isoformat(),
        "elapsed_seconds": round(finished - started, 3),
        "threads": threads,
        "python": platform.python_version(),
    }
    _atomic_write(str(path) + ".meta.json", _dump(meta))


def read_results(path) -> dict:
    try:
        data = json.loads(pathlib.Path(path).read_text())
    except OSError as exc:
        raise CliError("input", f"cannot read results: {exc}") from exc
    except ValueError as exc:
        raise CliError("input", f"results file is not JSON: {exc}") from exc
    if data.get("schema_version") != RESULTS_SCHEMA_VERSION or "conjectures" not in data:
        raise CliError("input", "unsupported results file", [f"schema_version: {data.get('schema_version')!r}"])
    return data


def _conjectures_from(data: dict) -> list[conjecture.Conjecture]:
    try:
        return [conjecture.Conjecture.from_json(c) for c in data["conjectures"]]
    except (KeyError, ValueError) as exc:
        raise CliError("input", f"malformed conjecture record: {exc}") from exc


def _output_path(args, cfg: RunConfig | None, key: str, default: str) -> str:
    if getattr(args, "output", None):
        return args.output
    if cfg is not None and cfg.output.get(key):
        return cfg.output[key]
    return default


# -- subcommands --------------------------------------------------------------------


def cmd_build_table(args) -> int:
    started = time.time()
    cfg = load_config(args)
    if not cfg.rhs:
        raise CliError("config", "build-table needs an [rhs] section", ["rhs: missing"])
    table = mitm.build_rhs_table(cfg.rhs_space(), cfg.fingerprint_length, cfg.constants, threads=cfg.threads)
    path = args.table or cfg.output.get("table") or "table.bin"
    table.save(path)
    summary = {"table": str(path), "records": len(table), "counters": table.header["counters"],
               "elapsed_seconds": round(time.time() - started, 3)}
    print(json.dumps(summary, sort_keys=True))
    return 0


def _load_table(path) -> mitm.FingerprintTable:
    try:
        return mitm.FingerprintTable.load(path)
    except OSError as exc:
        raise CliError("input", f"cannot read table: {exc}") from exc


def _verify_all(conjs, digits: int, threads: int, space_size: int):
    def one(c):
        return conjecture.verify(c, digits, space_size=space_size)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(one, conjs))


def search(cfg: RunConfig, table: mitm.FingerprintTable | None = None, swap: bool = False):
    """Run MITM search, refinement and verification; returns (conjectures, stats)."""
    lhs_space = cfg.lhs_space()
    stats: dict = {}
    if swap:
        rhs_space = cfg.rhs_space()
        hits = mitm.search_swapped(lhs_space, rhs_space, cfg.fingerprint_length, stats=stats)
    else:
        if table is None:
            table = mitm.build_rhs_table(cfg.rhs_space(), cfg.fingerprint_length, cfg.constants,
                                         threads=cfg.threads)
        rhs_space = mitm.RhsSpace.from_json(table.header["space"])
        stats["table"] = table.header["counters"]
        hits = mitm.query_lhs_against_table(lhs_space, table, stats)
    hits = list(hits)
    refined = list(mitm.refine_hits(hits, cfg.ladder))
    space_size = lhs_space_size(lhs_space) * rhs_space.size()
    groups: dict = {}
    for h in refined:
        if h.status == mitm.REFINED:
            groups.setdefault(conjecture.canonical_pair(h.lhs, h.pcf), []).append(h)
    drafts = []
    for key, members in groups.items():
        members.sort(key=_simplicity)
        h = members[0]
        variants = sorted({f"{m.lhs.format()} = {m.pcf.format()}" for m in members[1:]})
        drafts.append(conjecture.Conjecture(
            h.lhs, h.pcf, provenance=conjecture.MITM, flags=h.flags,
            metadata={"space_hash": mitm.space_hash(rhs_space.to_json()), "space_size": space_size,
                      "match_digits": round(float(h.match_digits), 3), "variants": variants},
        ))
    checked = _verify_all(drafts, cfg.verify_digits, cfg.threads, space_size)
    db = conjecture.default_db()
    out = []
    for c in checked:
        if c.status == conjecture.VERIFIED:
            c.novelty = conjecture.novelty_check(c, db)
        out.append(c)
    stats.update({
        "hits": len(hits),
        "refined": sum(h.status == mitm.REFINED for h in refined),
        "rejected": sum(h.status == mitm.REJECTED for h in refined),
        "distinct": len(drafts),  # after merging forms with the same canonical key
        "verified": sum(c.status == conjecture.VERIFIED for c in out),
        "space_size": space_size,
    })
    return out, stats


def _simplicity(hit: mitm.Hit):
    """Smallest LHS coefficients first, then smallest |a0|, then text."""
    lhs = hit.lhs.canonical()
    weight = sum(abs(c) for c in lhs.gamma.coeffs + lhs.delta.coeffs)
    return weight, abs(hit.pcf.a0), hit.lhs.format(), hit.pcf.format()


def cmd_search(args) -> int:
    started = time.time()
    cfg = load_config(args)
    if not args.swap and not args.table and not cfg.rhs:
        raise CliError("config", "search needs an [rhs] section or --table", ["rhs: missing"])
    table = _load_table(args.table) if args.table else None
    conjs, stats = search(cfg, table, args.swap)
    path = _output_path(args, cfg, "results", "results.json")
    write_results(path, results_payload("search", cfg, conjs, stats, {"swap": bool(args.swap)}),
                  started, cfg.threads)
    print(json.dumps({"results": str(path), **{k: v for k, v in stats.items() if k != "table"}}, sort_keys=True))
    return 0


def cmd_optimize(args) -> int:
    started = time.time()
    cfg = load_config(args)
    opt = dict(cfg.optimizer)
    source = opt.pop("template", None)
    source = args.template or source
    if not source:
        raise CliError("config", "optimize needs --template or optimizer.template", ["optimizer.template: missing"])
    try:
        template = descent.load_template(source)
    except (OSError, ValueError) as exc:
        raise CliError("template", str(exc)) from exc
    if args.target:
        template = descent.Template.from_dict({**template.to_dict(), "target": args.target})
    opt["seed"] = cfg.seed
    try:
        ocfg = descent.config_for(template, opt)
    except (TypeError, ValueError) as exc:
        raise CliError("config", str(exc), [str(exc)]) from exc
    result = descent.run(template, ocfg, record=bool(args.trajectory), verify_digits=cfg.verify_digits)
    conjs = [replace_novelty(c) for c in result.conjectures]
    stats = {"candidates": [list(c) for c in result.candidates], "verified": len(conjs),
             "diagnostic": result.diagnostic}
    path = _output_path(args, cfg, "results", "results.json")
    extra = {"template": template.to_dict(), "optimizer": ocfg.to_json()}
    write_results(path, results_payload("optimize", cfg, conjs, stats, extra), started, cfg.threads)
    if args.trajectory:
        lines = [json.dumps(rec, sort_keys=True) for rec in result.trajectory or ()]
        _atomic_write(args.trajectory, "\n".join(lines) + ("\n" if lines else ""))
    print(json.dumps({"results": str(path), **stats}, sort_keys=True))
    return 0


def replace_novelty(c: conjecture.Conjecture) -> conjecture.Conjecture:
    c.novelty = conjecture.novelty_check(c, conjecture.default_db())
    return c


def _parse_pcf(text: str) -> PcfDefinition:
    try:
        return PcfDefinition.parse(text)
    except ValueError as exc:
        raise CliError("input", f"cannot parse PCF: {exc}") from exc


def cmd_classify(args) -> int:
    pcf = _parse_pcf(args.pcf)
    try:
        window = tuple(int(x) for x in args.window.split(","))
        if len(window) != 2:
            raise ValueError
    except ValueError as exc:
        raise CliError("config", "--window expects START,END", ["window"]) from exc
    try:
        report = convergence.classify_and_measure(pcf, window) if args.measure else convergence.classify(pcf)
    except convergence.ClassificationUnavailableError as exc:
        raise CliError("input", str(exc)) from exc
    record = {"pcf": pcf.format(), **report.to_json()}
    print(json.dumps(record, sort_keys=True))
    if args.plot:
        xs, ys = convergence.agreement_series(pcf, 1, window[1])
        lines = ["# n digits"] + [f"{n} {d:.6f}" for n, d in zip(xs, ys)]
        _atomic_write(args.plot, "\n".join(lines) + "\n")
    return 0


def cmd_verify(args) -> int:
    started = time.time()
    data = read_results(args.results)
    conjs = _conjectures_from(data)
    threads = args.threads or os.cpu_count() or 1
    checked = _verify_all(conjs, args.digits, threads, 0)
    db = conjecture.default_db()
    for c in checked:
        if c.status == conjecture.VERIFIED:
            c.novelty = conjecture.novelty_check(c, db)
    data["conjectures"] = [c.to_json() for c in checked]
    data["verified_at_digits"] = args.digits
    path = args.output or args.results
    write_results(path, data, started, threads)
    print(json.dumps({"results": str(path), "verified": sum(c.status == conjecture.VERIFIED for c in checked),
                      "total": len(checked)}, sort_keys=True))
    return 0


def cmd_novelty(args) -> int:
    db = conjecture.default_db()
    if args.results:
        data = read_results(args.results)
        conjs = _conjectures_from(data)
        for c in conjs:
            c.novelty = conjecture.novelty_check(c, db)
        data["conjectures"] = [c.to_json() for c in conjs]
        path = args.output or args.results
        _atomic_write(path, _dump(data))
        print(json.dumps({"results": str(path), "known": sum(c.novelty == conjecture.KNOWN for c in conjs),
                          "new": sum(c.novelty == conjecture.NEW for c in conjs)}, sort_keys=True))
        return 0
    if not (args.lhs and args.pcf):
        raise CliError("input", "novelty needs a results file or both --lhs and --pcf", ["lhs", "pcf"])
    try:
        lhs = parse_formula(args.lhs)
    except ValueError as exc:
        raise CliError("input", f"cannot parse LHS: {exc}") from exc
    c = conjecture.Conjecture(lhs, _parse_pcf(args.pcf))
    status = conjecture.novelty_check(c, db)
    record = db.lookup(c.lhs, c.pcf)
    print(json.dumps({"novelty": status, "note": record.note if record else None}, sort_keys=True))
    return 0


def cmd_report(args) -> int:
    conjs = _conjectures_from(read_results(args.results)) if args.results else []
    doc = conjecture.emit_report(conjs, args.format)
    if args.output:
        _atomic_write(args.output, doc)
    else:
        sys.stdout.write(doc)
    return 0


# -- parser ---------------------------------------------------------------------


def _config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML or JSON run configuration")
    p.add_argument("--constant", action="append", help="constant id (repeatable); overrides `constants`")
    p.add_argument("--fingerprint-length", type=int, dest="fingerprint_length")
    p.add_argument("--ladder", help="comma-separated refinement precisions, e.g. 10,30,100")
    p.add_argument("--seed", type=int)
    p.add_argument("--verify-digits", type=int, dest="verify_digits")
    p.add_argument("--threads", type=int, help="parallelism budget (default: available cores)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config key, e.g. rhs.alpha_range=[-3,3]")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pcfmatch", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pcfmatch {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-table", help="enumerate an RHS space into a fingerprint table")
    _config_flags(p)
    p.add_argument("--table", help="output table path")
    p.set_defaults(func=cmd_build_table)

    p = sub.add_parser("search", help="MITM search, refinement and verification")
    _config_flags(p)
    p.add_argument("--table", help="prebuilt RHS table to query")
    p.add_argument("--swap", action="store_true", help="tabulate the LHS side and stream the RHS space")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("optimize", help="Descent&Repel over a PCF template")
    _config_flags(p)
    p.add_argument("--template", help="template file or shipped template name")
    p.add_argument("--target", help="override the template target expression, e.g. 'e - 3'")
    p.add_argument("--trajectory", help="write per-step points as JSON lines")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("classify", help="convergence class and rates of one PCF")
    p.add_argument("pcf", help='PCF text, e.g. "a0=1; a[n]=1+2*n; b[n]=n^2"')
    p.add_argument("--window", default="20,200", help="measurement window START,END")
    p.add_argument("--no-measure", dest="measure", action="store_false")
    p.add_argument("--plot", help="write per-term digits of agreement to this file")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("verify", help="re-verify the conjectures of a results file")
    p.add_argument("results")
    p.add_argument("--digits", type=int, default=conjecture.PUBLICATION_DIGITS)
    p.add_argument("--threads", type=int)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("novelty", help="look conjectures up in the known-results database")
    p.add_argument("results", nargs="?")
    p.add_argument("--lhs")
    p.add_argument("--pcf")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_novelty)

    p = sub.add_parser("report", help="render a results file")
    p.add_argument("results", nargs="?", help="results file (omit for an empty report)")
    p.add_argument("--format", choices=("json", "latex"), default="json")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_report)
    return parser


def _fail(category: str, message: str, problems=()) -> int:
    err = {"error": category, "message": message, "problems": list(problems)}
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return EXIT_CODES[category]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        return _fail(exc.category, str(exc), exc.problems)
    except mitm.TableFormatError as exc:
        return _fail("table_format", str(exc))
    except mitm.ConstantMismatchError as exc:
        return _fail("constant_mismatch", str(exc))
    except conjecture.DbIntegrityError as exc:
        return _fail("integrity", str(exc))
    except descent.TemplateError as exc:
        return _fail("template", str(exc))
    except ConfigError as exc:
        return _fail("config", "invalid configuration", exc.problems)
    except (FileNotFoundError, IsADirectoryError) as exc:
        return _fail("input", str(exc))
    except Exception as exc:  # noqa: BLE001
        traceback.print_exc(file=sys.stderr)
        return _fail("internal", f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
