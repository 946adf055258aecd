"""Command-line interface: census runs, rank lookups, table emission,
and complex decompositions."""

from __future__ import annotations

import argparse
import contextlib
import fcntl
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import core, decompose, f2

DEFAULT_CACHE_ENV = "TENSORLAB_CACHE"


@dataclass
class RunConfig:
    command: str
    dims: tuple = (3, 3, 3)
    code: int | None = None
    input_path: str | None = None
    decomp_path: str | None = None
    cache_path: str | None = None
    out_format: str = "dots"
    low_memory: bool = False
    threads: int = 1
    tol_rank: float | None = None
    tol_residual: float | None = None

    def __post_init__(self):
        self.dims = core._check_dims(self.dims)
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def tolerance(self):
        base = decompose.DEFAULT_TOL
        return decompose.Tolerance(
            rank_tol=self.tol_rank if self.tol_rank else base.rank_tol,
            eig_cluster_tol=base.eig_cluster_tol,
            residual_tol=self.tol_residual if self.tol_residual else base.residual_tol)

    def cache(self):
        if self.cache_path:
            return self.cache_path
        env = os.environ.get(DEFAULT_CACHE_ENV)
        if env:
            return env
        p, q, r = self.dims
        return f"f2census-{p}{q}{r}.bin"


@contextlib.contextmanager
def _cache_lock(path):
    """Advisory lock so concurrent commands do not race on one cache."""
    lock_path = str(path) + ".lock"
    fd = os.open(lock_path, os.O_CREAT | os.O_RDWR, 0o644)
    try:
        fcntl.flock(fd, fcntl.LOCK_EX)
        yield
    finally:
        fcntl.flock(fd, fcntl.LOCK_UN)
        os.close(fd)


def _read_input(path):
    if path == "-":
        return sys.stdin.read()
    with open(path) as f:
        return f.read()


def _parse_code(text):
    code = core._parse_code_token(text.strip())
    if code is None:
        raise core.TensorFormatError(f"not an integer code: {text!r}")
    return code


def _load_or_build(cfg, persist=False):
    path = cfg.cache()
    if os.path.exists(path):
        tables = f2.load_census(path)
        if tables.dims != cfg.dims:
            raise f2.CensusError(
                f"cache {path} holds dims {tables.dims}, requested {cfg.dims}")
        return tables, True
    tables = f2.full_census(cfg.dims, low_memory=cfg.low_memory)
    if persist:
        f2.save_census(tables, path)
    return tables, False


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_census(cfg):
    path = cfg.cache()
    t0 = time.time()
    with _cache_lock(path):
        if os.path.exists(path):
            tables = f2.load_census(path)
            if tables.dims != cfg.dims:
                print(f"error: cache {path} holds dims {tables.dims}", file=sys.stderr)
                return 1
            cached = True
        else:
            try:
                tables = f2.full_census(cfg.dims, low_memory=cfg.low_memory)
            except f2.CensusMemoryError as e:
                print(f"error: {e}", file=sys.stderr)
                return 1
            try:
                f2.save_census(tables, path)
            except OSError as e:
                with contextlib.suppress(OSError):
                    os.remove(path)
                print(f"error: writing cache failed: {e}", file=sys.stderr)
                return 1
            cached = False
    elapsed = time.time() - t0
    small = len(tables.orbits)
    large = len(tables.large_orbits)
    max_rank = max(r.rank for r in tables.orbits)
    print(f"small={small} large={large} max_rank={max_rank}")
    summary = f2.census_summary(tables)
    counts = " ".join(str(c) for c in summary["tensors"][1:])
    print(f"tensors_by_rank={counts}")
    source = "cache" if cached else "computed"
    print(f"cache={path} source={source} seconds={elapsed:.1f}")
    return 0


def cmd_rank_f2(cfg):
    if cfg.code == 0:
        print("code=0 rank=0")
        return 0
    nbits = int(np.prod(cfg.dims))
    if not 0 <= cfg.code < (1 << nbits):
        print(f"error: code {cfg.code} out of range for dims {cfg.dims}",
              file=sys.stderr)
        return 1
    with _cache_lock(cfg.cache()):
        tables, _ = _load_or_build(cfg)
    rec = tables.orbit_of(cfg.code)
    canonical = core.F2Code(rec.canonical_code, cfg.dims)
    print(f"code={cfg.code} rank={tables.rank_of(cfg.code)} "
          f"small_orbit={rec.index} large_orbit={rec.large_index} "
          f"canonical={canonical.pattern()}")
    return 0


def cmd_orbit_f2(cfg):
    if cfg.code == 0:
        print("code=0 orbit=zero size=1")
        return 0
    nbits = int(np.prod(cfg.dims))
    if not 0 <= cfg.code < (1 << nbits):
        print(f"error: code {cfg.code} out of range for dims {cfg.dims}",
              file=sys.stderr)
        return 1
    with _cache_lock(cfg.cache()):
        tables, _ = _load_or_build(cfg)
    rec = tables.orbit_of(cfg.code)
    canonical = core.F2Code(rec.canonical_code, cfg.dims)
    print(f"code={cfg.code} small_orbit={rec.index} size={rec.size} "
          f"rank={rec.rank} large_orbit={rec.large_index} "
          f"canonical={rec.canonical_code} pattern={canonical.pattern()}")
    return 0


def cmd_table(cfg):
    path = cfg.cache()
    if not os.path.exists(path):
        print(f"error: missing cache {path}; run the census command first",
              file=sys.stderr)
        return 1
    with _cache_lock(path):
        tables = f2.load_census(path)
    f2.emit_table(tables, sys.stdout, cfg.out_format)
    return 0


def cmd_decompose(cfg):
    tol = cfg.tolerance()
    try:
        t = core.read_tensor_text(_read_input(cfg.input_path))
    except core.TensorFormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    dims = t.dims
    data = np.asarray(t.data, np.complex128)
    try:
        if dims == (2, 2, 2):
            d = decompose.decompose_222(t, tol)
        elif sorted(dims) == [2, 3, 3]:
            axes = tuple(np.argsort([-d for d in dims], kind="stable"))
            oriented = core.DenseTensor(np.transpose(data, axes))
            dd = decompose.decompose_332(oriented, tol)
            terms = decompose._untranspose_terms(
                [(np.array(s.a), np.array(s.b), np.array(s.c)) for s in dd.terms],
                axes)
            d = decompose._finish(data, terms, tol)
        elif dims == (3, 3, 3):
            d = decompose.decompose_333(t, tol)
        else:
            print(f"error: unsupported dims {dims} (2x2x2, 3x3x2 up to "
                  "direction order, or 3x3x3)", file=sys.stderr)
            return 2
    except decompose.DiagnosticFailure as e:
        print(f"error: decomposition failed: {e}", file=sys.stderr)
        return 3
    sys.stdout.write(core.write_decomposition_text(d))
    print(f"terms {len(d)}")
    return 0 if d.residual <= tol.residual_tol else 1


def cmd_rank222(cfg):
    t = core.read_tensor_text(_read_input(cfg.input_path))
    if t.dims != (2, 2, 2):
        print(f"error: rank222 requires dims (2, 2, 2), got {t.dims}",
              file=sys.stderr)
        return 2
    print(f"rank={decompose.rank_222(t, cfg.tolerance())}")
    return 0


def cmd_hyperdet(cfg):
    t = core.read_tensor_text(_read_input(cfg.input_path))
    if t.dims != (2, 2, 2):
        print(f"error: hyperdet requires dims (2, 2, 2), got {t.dims}",
              file=sys.stderr)
        return 2
    print(f"hyperdet={core.format_scalar(decompose.hyperdeterminant(t))}")
    return 0


def cmd_verify(cfg):
    tol = cfg.tolerance()
    t = core.read_tensor_text(_read_input(cfg.input_path))
    d = core.read_decomposition_text(_read_input(cfg.decomp_path))
    if tuple(d.target_dims) != tuple(t.dims):
        print(f"error: decomposition dims {d.target_dims} do not match "
              f"tensor dims {t.dims}", file=sys.stderr)
        return 2
    residual = decompose.verify(t, d, tol)
    print(f"terms {len(d)}")
    print(f"residual {residual:.17g}")
    return 0 if residual <= tol.residual_tol else 1


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="tensorlab",
        description="Rank census of small GF(2) tensors and constructive "
                    "complex tensor decompositions.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, cache=False, dims=False, tols=False):
        if dims:
            p.add_argument("--dims", nargs=3, type=int, default=[3, 3, 3],
                           metavar=("P", "Q", "R"),
                           help="tensor format, each in 1..3 (default 3 3 3)")
        if cache:
            p.add_argument("--cache", default=None, metavar="PATH",
                           help=f"census cache file (default ${DEFAULT_CACHE_ENV} "
                                "or ./f2census-PQR.bin)")
        if tols:
            p.add_argument("--tol-rank", type=float, default=None, metavar="X",
                           help="relative singular-value cutoff")
            p.add_argument("--tol-residual", type=float, default=None, metavar="X",
                           help="decomposition acceptance threshold")
        p.add_argument("--threads", type=int, default=1,
                       help="internal parallelism hint; output is identical "
                            "for any value")

    p = sub.add_parser("census", help="classify all nonzero codes and cache the result")
    common(p, cache=True, dims=True)
    p.add_argument("--low-memory", action="store_true",
                   help="skip the link array to shrink the working set")

    p = sub.add_parser("rank-f2", help="rank and orbit of one code")
    p.add_argument("code", help="code as decimal or 0x-hex")
    common(p, cache=True, dims=True)

    p = sub.add_parser("orbit-f2", help="orbit details of one code")
    p.add_argument("code", help="code as decimal or 0x-hex")
    common(p, cache=True, dims=True)

    p = sub.add_parser("table", help="emit the large-orbit table from the cache")
    common(p, cache=True, dims=True)
    p.add_argument("--format", choices=("tsv", "dots"), default="dots",
                   dest="out_format")

    p = sub.add_parser("decompose", help="decompose a tensor read from FILE or -")
    p.add_argument("input", metavar="FILE")
    common(p, tols=True)

    p = sub.add_parser("rank222", help="exact rank of a 2x2x2 tensor")
    p.add_argument("input", metavar="FILE")
    common(p, tols=True)

    p = sub.add_parser("hyperdet", help="Cayley hyperdeterminant of a 2x2x2 tensor")
    p.add_argument("input", metavar="FILE")
    common(p, tols=True)

    p = sub.add_parser("verify", help="residual of a decomposition against a tensor")
    p.add_argument("input", metavar="TENSOR_FILE")
    p.add_argument("decomposition", metavar="DECOMP_FILE")
    common(p, tols=True)
    return parser


def _config_from_args(args):
    return RunConfig(
        command=args.command,
        dims=tuple(getattr(args, "dims", (3, 3, 3))),
        code=_parse_code(args.code) if getattr(args, "code", None) else None,
        input_path=getattr(args, "input", None),
        decomp_path=getattr(args, "decomposition", None),
        cache_path=getattr(args, "cache", None),
        out_format=getattr(args, "out_format", "dots"),
        low_memory=getattr(args, "low_memory", False),
        threads=getattr(args, "threads", 1),
        tol_rank=getattr(args, "tol_rank", None),
        tol_residual=getattr(args, "tol_residual", None))


_HANDLERS = {
    "census": cmd_census,
    "rank-f2": cmd_rank_f2,
    "orbit-f2": cmd_orbit_f2,
    "table": cmd_table,
    "decompose": cmd_decompose,
    "rank222": cmd_rank222,
    "hyperdet": cmd_hyperdet,
    "verify": cmd_verify,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
    except (ValueError, core.TensorFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        return _HANDLERS[cfg.command](cfg)
    except (core.TensorFormatError, f2.CensusError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
