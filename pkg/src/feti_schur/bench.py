"""Measurement drivers: block-size sweeps, the correctness suite, amortization tables.

Sweeps and amortization runs work on one representative subdomain per
``(dim, n)`` (subdomain 0 of a generated decomposition) and write CSV. FLOP
and error columns are deterministic; wall-clock columns are medians over
repetitions and are reported, never checked.
"""

from __future__ import annotations

import csv
import io
import math
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, TextIO

import numpy as np

from .assembler import (
    AmortizationInputs,
    AssemblyConfig,
    amortization_point,
    apply_explicit,
    apply_implicit,
    assemble_explicit,
    factorize_subdomain,
    finish_operator,
    oracle_sc,
    prepare_rhs,
    worker_count,
)
from .cholesky import FactorBundle, factorize
from .matrix_core import (
    NotSPDError,
    SingularError,
    SparseCsr,
    csr_to_dense,
    permute_symmetric,
    relative_frobenius,
    transpose,
)
from .problem import DecompositionSpec, SubdomainProblem, generate
from .stepped import BlockPolicy, compute_profile
from .synthetic import (
    dense_lower_factor,
    random_lower_factor,
    random_spd,
    stepped_dense,
    triangular_pivots,
)
from .syrk import SYRK_VARIANTS, SyrkConfig, syrk
from .trsm import STORAGES, TRSM_VARIANTS, TrsmConfig, trsm

SWEEP_COLUMNS = (
    "dim", "n", "m", "variant", "partition_policy", "partition_value", "pruning",
    "flops_trsm", "flops_syrk", "wall_ms_trsm", "wall_ms_syrk", "wall_ms_total",
    "oracle_rel_err",
)
AMORTIZATION_COLUMNS = (
    "dim", "n", "variant", "t_factor_ms", "t_assembly_ms", "t_apply_impl_us",
    "t_apply_expl_us", "amortization_iters",
)
_INT_COLS = {"dim", "n", "m", "partition_value", "flops_trsm", "flops_syrk"}
_BOOL_COLS = {"pruning"}
_STR_COLS = {"variant", "partition_policy"}

OVERLAP_NOTE = ("per-subdomain medians on one representative subdomain; concurrency and "
                "overlap across many subdomains are not modelled")

DEFAULT_SWEEP_VARIANT = "factor_split:dense+input_split"
BASELINE_VARIANT = "baseline_dense+baseline"
MIN_TIMED_REPS = 3


class BenchIOError(OSError):
    pass


# --------------------------------------------------------------------------- variants

def parse_variant(text: str, partition: BlockPolicy | None = None,
                  pruning: bool = True) -> AssemblyConfig:
    """``"<trsm>[:<storage>]+<syrk>"`` to an :class:`AssemblyConfig`.

    >>> parse_variant("factor_split:dense+input_split").label
    'factor_split:dense+input_split'
    """
    partition = partition or BlockPolicy()
    try:
        t_part, s_part = text.split("+")
    except ValueError:
        raise ValueError(f"variant {text!r} is not of the form <trsm>[:<storage>]+<syrk>") from None
    t_name, _, storage = t_part.partition(":")
    storage = storage or "sparse"
    if t_name not in TRSM_VARIANTS:
        raise ValueError(f"unknown TRSM variant {t_name!r} (choose from {TRSM_VARIANTS})")
    if s_part not in SYRK_VARIANTS:
        raise ValueError(f"unknown SYRK variant {s_part!r} (choose from {SYRK_VARIANTS})")
    return AssemblyConfig(TrsmConfig(t_name, partition, storage, pruning),
                          SyrkConfig(s_part, partition))


def uses_partition(cfg: AssemblyConfig) -> bool:
    return not (cfg.trsm.variant.startswith("baseline") and cfg.syrk.variant == "baseline")


def trsm_configs(partition: BlockPolicy) -> list[TrsmConfig]:
    """Every TRSM variant/storage/pruning combination."""
    out = [TrsmConfig("baseline_dense", partition), TrsmConfig("baseline_sparse", partition)]
    for storage in STORAGES:
        out.append(TrsmConfig("rhs_split", partition, storage))
    for storage in STORAGES:
        for pruning in (True, False):
            out.append(TrsmConfig("factor_split", partition, storage, pruning))
    return out


def all_variant_configs(partitions: Iterable[BlockPolicy]) -> list[AssemblyConfig]:
    """Every (TRSM, SYRK) combination for each partition."""
    return [AssemblyConfig(t, SyrkConfig(s, part))
            for part in partitions for t in trsm_configs(part) for s in SYRK_VARIANTS]


# --------------------------------------------------------------------------- problems

def representative_problem(dim: int, n: int, subdomains_per_edge: int = 2,
                           rho: float = 1.0) -> SubdomainProblem:
    return generate(DecompositionSpec.for_size(dim, n, subdomains_per_edge, rho)).subdomains[0]


def _fits(dim: int, n: int) -> bool:
    side = int(round(n ** (1.0 / dim)))
    return side >= 2 and side ** dim == n


@dataclass(frozen=True)
class SweepSpec:
    """Grid of sweep cells.

    ``variants`` are strings understood by :func:`parse_variant`. A size that
    is not ``(k+1)**dim`` is skipped for that ``dim``; it must fit at least one.
    """

    dims: tuple[int, ...] = (3,)
    subdomain_sizes: tuple[int, ...] = (2744,)
    variants: tuple[str, ...] = (DEFAULT_SWEEP_VARIANT,)
    partition_values: tuple[BlockPolicy, ...] = tuple(
        BlockPolicy.fixed_size(s) for s in (10, 50, 200, 500, 2000, 10000))
    repetitions: int = 3
    prunings: tuple[bool, ...] = (True,)
    check: bool = False
    subdomains_per_edge: int = 2
    ordering: str = "amd"
    delay_glued: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("dims", "subdomain_sizes", "variants", "partition_values", "prunings"):
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")
        if not set(self.dims) <= {2, 3}:
            raise ValueError(f"dims must be a subset of {{2, 3}}, got {self.dims}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        for n in self.subdomain_sizes:
            if not any(_fits(d, n) for d in self.dims):
                raise ValueError(f"size {n} is not (k+1)**dim for any dim in {self.dims}")
        for v in self.variants:
            parse_variant(v)

    def cells(self):
        """Yield ``(dim, n, AssemblyConfig)`` in CSV order."""
        for dim in self.dims:
            for n in self.subdomain_sizes:
                if not _fits(dim, n):
                    continue
                for v in self.variants:
                    if not uses_partition(parse_variant(v)):
                        yield dim, n, parse_variant(v)
                        continue
                    split_trsm = parse_variant(v).trsm.variant == "factor_split"
                    for part in self.partition_values:
                        for pr in (self.prunings if split_trsm else (True,)):
                            yield dim, n, parse_variant(v, part, pr)


@dataclass
class SweepSummary:
    rows: list[dict]
    max_oracle_rel_err: float | None = None

    @property
    def n_rows(self) -> int:
        return len(self.rows)


# --------------------------------------------------------------------------- CSV

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _open_sink(out, what: str):
    if out is None:
        return io.StringIO(), False
    if hasattr(out, "write"):
        return out, False
    try:
        return open(out, "w", newline="", encoding="utf-8"), True
    except OSError as exc:
        raise BenchIOError(exc.errno, f"cannot write {what} CSV '{out}': {exc.strerror}") from exc


class _CsvSink:
    """Opened at the start of a run so a bad path fails before any work is done."""

    def __init__(self, out, what: str):
        self.out, self.what = out, what
        self.fh, self.owned = _open_sink(out, what)

    def write(self, rows: list[dict], columns, comments: Iterable[str] = ()) -> None:
        try:
            for c in comments:
                self.fh.write(f"# {c}\n")
            w = csv.writer(self.fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(row.get(c)) for c in columns])
            self.fh.flush()
        except OSError as exc:
            raise BenchIOError(exc.errno,
                               f"error writing {self.what} CSV '{self.out}': {exc.strerror}") from exc
        finally:
            if self.owned:
                self.fh.close()


def write_csv(rows: list[dict], columns, out, comments: Iterable[str] = (), what: str = "") -> None:
    _CsvSink(out, what).write(rows, columns, comments)


def _parse(col: str, text: str):
    if text == "":
        return None
    if col in _STR_COLS:
        return text
    if col in _BOOL_COLS:
        return text == "1"
    if col in _INT_COLS:
        return int(text)
    if col == "amortization_iters":
        return math.inf if text == "inf" else int(text)
    return float(text)


def read_csv(source: str | os.PathLike | TextIO) -> list[dict]:
    """Read a sweep or amortization CSV back into typed rows (``#`` lines skipped)."""
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        try:
            with open(source, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise BenchIOError(exc.errno, f"cannot read CSV '{source}': {exc.strerror}") from exc
    reader = csv.DictReader(line for line in lines if not line.startswith("#"))
    return [{k: _parse(k, v) for k, v in row.items()} for row in reader]


# --------------------------------------------------------------------------- sweep

def _median_ms(samples: list[float]) -> float:
    return statistics.median(samples) * 1e3


def _measure_cell(p: SubdomainProblem, fb: FactorBundle, cfg: AssemblyConfig, reps: int,
                  ref: np.ndarray | None, timed: bool = True) -> dict:
    t_trsm, t_syrk, t_total = [], [], []
    flops_t = flops_s = None
    err = None
    for rep in range(reps):
        t0 = time.perf_counter()
        staged = prepare_rhs(p, fb, cfg.stepped)
        t1 = time.perf_counter()
        ft = trsm(fb.L, staged.y, staged.profile, cfg.trsm, check=False, Lt=fb.Lt)
        t2 = time.perf_counter()
        f_lower, fs = syrk(staged.y, staged.profile.filled(), cfg.syrk, check=False)
        t3 = time.perf_counter()
        f = finish_operator(f_lower, staged.col_perm)
        t4 = time.perf_counter()
        t_trsm.append(t2 - t1)
        t_syrk.append(t3 - t2)
        t_total.append((t1 - t0) + (t2 - t1) + (t3 - t2) + (t4 - t3))
        if rep == 0:
            flops_t, flops_s = ft.total, fs.total
            if ref is not None:
                err = relative_frobenius(f, ref)
    part = cfg.trsm.partition
    return {
        "m": p.m,
        "variant": cfg.label,
        "partition_policy": part.kind if uses_partition(cfg) else "none",
        "partition_value": part.value if uses_partition(cfg) else None,
        "pruning": cfg.trsm.pruning if cfg.trsm.variant == "factor_split" else None,
        "flops_trsm": flops_t,
        "flops_syrk": flops_s,
        "wall_ms_trsm": _median_ms(t_trsm) if timed else None,
        "wall_ms_syrk": _median_ms(t_syrk) if timed else None,
        "wall_ms_total": _median_ms(t_total) if timed else None,
        "oracle_rel_err": err,
    }


def run_sweep(spec: SweepSpec, out=None, parallel: bool = False,
              progress: Callable[[str], None] | None = None) -> SweepSummary:
    """Run every cell of ``spec`` and write one CSV row per cell.

    With ``parallel`` the cells run concurrently and the wall-clock columns are
    left empty (FLOP-only run).
    """
    if not parallel and spec.repetitions < MIN_TIMED_REPS:
        raise ValueError(f"timed sweeps need at least {MIN_TIMED_REPS} repetitions")
    sink = _CsvSink(out, "sweep")
    cache: dict[tuple[int, int], tuple] = {}
    jobs = []
    for dim, n, cfg in spec.cells():
        if (dim, n) not in cache:
            p = representative_problem(dim, n, spec.subdomains_per_edge)
            fb = factorize_subdomain(p, spec.ordering, spec.delay_glued)
            cache[dim, n] = (p, fb, oracle_sc(p) if spec.check else None)
        jobs.append((dim, n, cfg))

    def one(job):
        dim, n, cfg = job
        p, fb, ref = cache[dim, n]
        row = {"dim": dim, "n": n}
        row.update(_measure_cell(p, fb, cfg, 1 if parallel else spec.repetitions, ref,
                                 timed=not parallel))
        if progress:
            progress(f"dim={dim} n={n} {row['variant']} {row['partition_policy']}:"
                     f"{row['partition_value']} done")
        return row

    if parallel:
        with ThreadPoolExecutor(max_workers=worker_count()) as pool:
            rows = list(pool.map(one, jobs))
    else:
        rows = [one(j) for j in jobs]
    comments = [f"sweep: {OVERLAP_NOTE}",
                f"repetitions={spec.repetitions} (median); ordering={spec.ordering}; "
                f"delay_glued={spec.delay_glued}"]
    sink.write(rows, SWEEP_COLUMNS, comments)
    errs = [r["oracle_rel_err"] for r in rows if r["oracle_rel_err"] is not None]
    return SweepSummary(rows, max(errs) if errs else None)


# --------------------------------------------------------------------------- amortization

@dataclass
class AmortizationTable:
    rows: list[dict]

    def format(self) -> str:
        lines = [f"{'dim':>3} {'n':>6} {'variant':<36} {'t_asm_ms':>10} {'impl_us':>9} "
                 f"{'expl_us':>9} {'iters':>6}"]
        for r in self.rows:
            it = r["amortization_iters"]
            lines.append(f"{r['dim']:>3} {r['n']:>6} {r['variant']:<36} "
                         f"{r['t_assembly_ms']:>10.3f} {r['t_apply_impl_us']:>9.1f} "
                         f"{r['t_apply_expl_us']:>9.1f} {'inf' if it == math.inf else it:>6}")
        return "\n".join(lines)


def _median_apply_us(fn, lams) -> float:
    samples = []
    for lam in lams:
        t0 = time.perf_counter()
        fn(lam)
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples) * 1e6


def run_amortization(spec: SweepSpec, out=None, applies: int = 100,
                     partition: BlockPolicy | None = None) -> AmortizationTable:
    """Factorization, assembly and apply timings with the resulting amortization points.

    Apply times are measured once per ``(dim, n)`` and shared by all variants:
    the explicit apply is a dense matvec whatever produced the matrix.
    Split variants use ``partition`` (default block size 500), not the sweep
    grid of ``spec``.
    """
    partition = partition or BlockPolicy()
    if applies < 1:
        raise ValueError("applies must be >= 1")
    if spec.repetitions < MIN_TIMED_REPS:
        raise ValueError(f"timed runs need at least {MIN_TIMED_REPS} repetitions")
    sink = _CsvSink(out, "amortization")
    rng = np.random.default_rng(spec.seed)
    rows = []
    for dim in spec.dims:
        for n in spec.subdomain_sizes:
            if not _fits(dim, n):
                continue
            p = representative_problem(dim, n, spec.subdomains_per_edge)
            t_fact = []
            for _ in range(spec.repetitions):
                t0 = time.perf_counter()
                fb = factorize_subdomain(p, spec.ordering, spec.delay_glued)
                t_fact.append(time.perf_counter() - t0)
            op = assemble_explicit(p, fb, AssemblyConfig.baseline())
            lams = rng.standard_normal((applies, p.m))
            t_impl = _median_apply_us(lambda lam: apply_implicit(p, fb, lam), lams)
            t_expl = _median_apply_us(lambda lam: apply_explicit(op, lam), lams)
            for v in spec.variants:
                cfg = parse_variant(v, partition)
                t_asm = []
                for _ in range(spec.repetitions):
                    t0 = time.perf_counter()
                    assemble_explicit(p, fb, cfg)
                    t_asm.append(time.perf_counter() - t0)
                t_asm_ms = _median_ms(t_asm)
                iters = amortization_point(AmortizationInputs(t_asm_ms * 1e3, t_impl, t_expl))
                rows.append({
                    "dim": dim, "n": n, "variant": cfg.label,
                    "t_factor_ms": _median_ms(t_fact), "t_assembly_ms": t_asm_ms,
                    "t_apply_impl_us": t_impl, "t_apply_expl_us": t_expl,
                    "amortization_iters": iters,
                })
    comments = [f"amortization: {OVERLAP_NOTE}",
                f"repetitions={spec.repetitions} (median); applies={applies} (median)"]
    sink.write(rows, AMORTIZATION_COLUMNS, comments)
    return AmortizationTable(rows)


# --------------------------------------------------------------------------- correctness

@dataclass
class InvariantResult:
    name: str
    checked: int = 0
    failed: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failed == 0 and self.checked > 0

    def record(self, ok: bool, note: str = "") -> None:
        self.checked += 1
        if not ok:
            self.failed += 1
            if note and len(self.notes) < 5:
                self.notes.append(note)


@dataclass
class CorrectnessReport:
    seed: int
    results: list[InvariantResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def format(self) -> str:
        lines = [f"correctness suite, seed {self.seed}"]
        for r in self.results:
            status = "PASS" if r.passed else "FAIL"
            lines.append(f"  {status} {r.name}: {r.checked - r.failed}/{r.checked} ok")
            lines.extend(f"      {note}" for note in r.notes)
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def _zero_diagonal(L: SparseCsr, row: int | None = None) -> SparseCsr:
    row = L.n_rows // 2 if row is None else row
    vals = L.values.copy()
    # the diagonal is the last entry of each row
    vals[L.row_ptr[row + 1] - 1] = 0.0
    return SparseCsr(L.n_rows, L.n_cols, L.row_ptr, L.col_idx, vals)


def corrupt_factor(fb: FactorBundle, row: int | None = None) -> FactorBundle:
    """Copy of ``fb`` with one diagonal entry of L set to zero (negative-test hook)."""
    bad = _zero_diagonal(fb.L, row)
    return FactorBundle(fb.perm, fb.symbolic, bad, transpose(bad))


CHECK_SIZES = {2: (49, 81, 289), 3: (64, 343)}


def _check_partitions() -> list[BlockPolicy]:
    return [BlockPolicy.fixed_size(16), BlockPolicy.fixed_count(3)]


def _ratio_counts(n: int, block: int, rng) -> tuple[float, float]:
    """Baseline/optimized FLOP ratios for rhs-split TRSM (dense) and input-split SYRK."""
    L = dense_lower_factor(rng, n)
    x = stepped_dense(rng, n, n, triangular_pivots(n, n))
    prof = compute_profile(x)
    part = BlockPolicy.fixed_size(block)
    base_t = trsm(L, x.copy(), prof, TrsmConfig("baseline_dense"), check=False)
    split_t = trsm(L, x.copy(), prof, TrsmConfig("rhs_split", part, "dense"), check=False)
    _, base_s = syrk(x, prof, SyrkConfig("baseline"), check=False)
    _, split_s = syrk(x, prof, SyrkConfig("input_split", part), check=False)
    return base_t.total / split_t.total, base_s.total / split_s.total


def run_correctness(seed: int = 42, corrupt: bool = False,
                    progress: Callable[[str], None] | None = None) -> CorrectnessReport:
    """Invariant suite over generated subdomains and seeded random instances.

    ``corrupt`` zeroes a diagonal entry of every factor before assembly; the
    suite must then fail with the singular row reported.
    """
    rng = np.random.default_rng(seed)
    fact = InvariantResult("factorization reconstruction (< 1e-12)")
    oracle = InvariantResult("oracle equivalence, all variant combinations (< 1e-10)")
    zeros = InvariantResult("zero preservation above column pivots (bit-exact)")
    equiv = InvariantResult("variant equivalence against baselines (< 1e-12)")
    ratios = InvariantResult("work ratios (>= 2.7, monotone in block size)")
    apply_ = InvariantResult("implicit/explicit apply agreement (< 1e-10)")
    say = progress or (lambda msg: None)

    configs = all_variant_configs(_check_partitions())
    for dim, sizes in CHECK_SIZES.items():
        for n in sizes:
            say(f"generated problem dim={dim} n={n}")
            p = representative_problem(dim, n)
            fb = factorize_subdomain(p)
            pkp = csr_to_dense(permute_symmetric(p.k_reg, fb.perm))
            ld = csr_to_dense(fb.L)
            err = np.linalg.norm(pkp - ld @ ld.T) / np.linalg.norm(pkp)
            fact.record(err < 1e-12, f"dim={dim} n={n}: {err:.2e}")
            if corrupt:
                fb = corrupt_factor(fb)
            ref = oracle_sc(p)
            for cfg in configs:
                try:
                    op = assemble_explicit(p, fb, cfg)
                    err = relative_frobenius(op.f, ref)
                    oracle.record(err < 1e-10, f"dim={dim} n={n} {cfg.label}: {err:.2e}")
                except SingularError as exc:
                    oracle.record(False, f"dim={dim} n={n} {cfg.label}: {exc}")
            op = assemble_explicit(p, fb, AssemblyConfig.baseline()) if not corrupt else None
            for _ in range(10):
                lam = rng.standard_normal(p.m)
                try:
                    q, _ = apply_implicit(p, fb, lam)
                except SingularError as exc:
                    apply_.record(False, f"dim={dim} n={n}: {exc}")
                    continue
                qe, _ = apply_explicit(op, lam)
                err = np.linalg.norm(q - qe) / np.linalg.norm(q)
                apply_.record(err < 1e-10, f"dim={dim} n={n}: {err:.2e}")

    say("random SPD matrices")
    for _ in range(10):
        k = random_spd(rng, int(rng.integers(5, 60)))
        try:
            fb = factorize(k, str(rng.choice(["amd", "rcm", "natural"])))
        except NotSPDError as exc:
            fact.record(False, f"random SPD: {exc}")
            continue
        pkp = csr_to_dense(permute_symmetric(k, fb.perm))
        ld = csr_to_dense(fb.L)
        err = np.linalg.norm(pkp - ld @ ld.T) / np.linalg.norm(pkp)
        fact.record(err < 1e-12, f"random SPD n={k.n_rows}: {err:.2e}")

    say("random stepped instances")
    for _ in range(100):
        n = int(rng.integers(1, 60))
        m = int(rng.integers(1, 40))
        L = random_lower_factor(rng, n, float(rng.uniform(0.05, 0.5)))
        if corrupt:
            L = _zero_diagonal(L)
        x0 = stepped_dense(rng, n, m, density=float(rng.uniform(0.2, 1.0)))
        prof = compute_profile(x0)
        part = BlockPolicy.fixed_size(int(rng.integers(1, max(2, n))))
        ref = None
        for cfg in trsm_configs(part):
            x = x0.copy()
            try:
                trsm(L, x, prof, cfg)
            except SingularError as exc:
                zeros.record(False, f"n={n} m={m} {cfg.label}: {exc}")
                continue
            above = np.arange(n)[:, None] < prof.col_pivots[None, :]
            zeros.record(bool(np.all(x[above] == 0.0)), f"n={n} m={m} {cfg.label}")
            if ref is None:
                ref = x
            else:
                err = relative_frobenius(x, ref)
                equiv.record(err < 1e-12, f"trsm n={n} m={m} {cfg.label}: {err:.2e}")
        if ref is None:
            continue
        yprof = prof.filled()
        f_ref, _ = syrk(ref, yprof, SyrkConfig("baseline"))
        for variant in ("input_split", "output_split"):
            f, _ = syrk(ref, yprof, SyrkConfig(variant, part))
            err = relative_frobenius(f, f_ref)
            equiv.record(err < 1e-12, f"syrk n={n} m={m} {variant}: {err:.2e}")

    say("work ratios")
    prev = (0.0, 0.0)
    for block in (128, 64, 16):
        rt, rs = _ratio_counts(512, block, rng)
        ratios.record(rt > prev[0] and rs > prev[1],
                      f"block {block}: ratios {rt:.3f}/{rs:.3f} not increasing")
        prev = (rt, rs)
    ratios.record(min(prev) >= 2.7, f"block 16: ratios {prev[0]:.3f}/{prev[1]:.3f} < 2.7")

    return CorrectnessReport(seed, [fact, oracle, zeros, equiv, ratios, apply_])
