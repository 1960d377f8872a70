"""
Rate worker - runs a batch of two-photon rate jobs in a background thread,
emitting callbacks for progress, log lines and completion.
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from tpdc.core.basis import BasisSpec, NuclearModel, SPEED_OF_LIGHT
from tpdc.core.channels import MultipoleChannel, channel_kappas
from tpdc.core.dirac import DiracSpectrum, solve_spectrum
from tpdc.core.errors import SpuriousStateWarning, TpdcError
from tpdc.core.specfun import PrecisionCtx
from tpdc.core.twophoton import DEFAULT_QUAD_POINTS, RateResult, total_rate, transition_states

logger = logging.getLogger(__name__)


class Signal:
    """Minimal callback list with the connect/emit surface of a Qt signal."""

    def __init__(self):
        self._slots = []
        self._lock = threading.RLock()

    def connect(self, slot):
        with self._lock:
            self._slots.append(slot)

    def emit(self, *args):
        with self._lock:
            for slot in list(self._slots):
                slot(*args)


@dataclass(frozen=True)
class RateJob:
    """One nuclear charge, basis and channel list to evaluate."""
    spec: BasisSpec
    nuc: NuclearModel
    channels: tuple
    digits: int = 34
    quad_points: int = DEFAULT_QUAD_POINTS
    initial: tuple = (2, -1)         # (n, kappa)
    final: tuple = (1, -1)
    solver: str = "auto"
    bond_variant: str = "johnson"
    c: str = SPEED_OF_LIGHT

    @property
    def label(self) -> str:
        names = ",".join(ch.name for ch in self.channels)
        return f"Z={self.nuc.Z:g} {self.spec.kind.value} N={self.spec.count} R={self.spec.radius:g} [{names}]"

    @property
    def kappas(self) -> list:
        """Every kappa spectrum the job needs, initial and final symmetries first."""
        out = []
        for k in (self.initial[1], self.final[1]):
            if k not in out:
                out.append(k)
        for k in channel_kappas(self.channels, self.initial[1], self.final[1]):
            if k not in out:
                out.append(k)
        return out


@dataclass
class JobOutcome:
    job: RateJob
    results: list = field(default_factory=list)
    error: str | None = None
    cached: bool = False

    @property
    def success(self) -> bool:
        return self.error is None and len(self.results) == len(self.job.channels)


class RateWorker:
    """
    Runs rate jobs in order.  Independent spectra and channels of one job
    are fanned out over a thread pool when max_workers > 1; results are
    collected in submission order so reports stay deterministic.

    `cache` is any object with load_spectrum / store_spectrum / load_rate /
    store_rate (see tpdc.cli.cache.SpectrumCache); jobs whose rates are
    already cached are skipped.
    """

    def __init__(self, jobs: list, cache=None, max_workers: int = 1):
        self.jobs = list(jobs)
        self.cache = cache
        self.max_workers = max(1, int(max_workers))
        self.outcomes: list[JobOutcome] = []

        self.log_output = Signal()        # human-readable line
        self.job_started = Signal()       # index, total, label
        self.job_finished = Signal()      # index, total, label, success
        self.done = Signal()              # all jobs finished or cancelled

        self._cancelled = threading.Event()
        self._thread: threading.Thread | None = None

    def cancel(self):
        self._cancelled.set()

    @property
    def cancelled(self) -> bool:
        return self._cancelled.is_set()

    # Thread control, mirroring QThread.start()/wait().
    def start(self):
        self._thread = threading.Thread(target=self.run, name="tpdc-rate-worker", daemon=True)
        self._thread.start()

    def wait(self, timeout: float | None = None) -> bool:
        if self._thread is None:
            return True
        self._thread.join(timeout)
        return not self._thread.is_alive()

    def _log(self, line: str):
        logger.info(line)
        self.log_output.emit(line)

    def _map(self, fn, items: list) -> list:
        if self.max_workers == 1 or len(items) < 2:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=min(self.max_workers, len(items))) as pool:
            return list(pool.map(fn, items))

    # ── Per-job work ──────────────────────────────────────────────────

    def spectrum(self, job: RateJob, kappa: int) -> DiracSpectrum:
        """Load a cached spectrum or solve it; each call uses its own precision context."""
        if self.cache is not None:
            cached = self.cache.load_spectrum(job.spec, job.nuc, kappa, job.digits, job.c,
                                              job.solver, job.bond_variant)
            if cached is not None:
                self._log(f"  kappa={kappa:+d}: spectrum from cache")
                return cached
        spectrum = solve_spectrum(job.spec, job.nuc, kappa, PrecisionCtx(job.digits), job.c,
                                  job.solver, job.bond_variant)
        if self.cache is not None:
            self.cache.store_spectrum(spectrum, job.solver)
        self._log(f"  kappa={kappa:+d}: {len(spectrum.orbitals)} pseudostates, "
                  f"{len(spectrum.bound)} bound")
        return spectrum

    def _channel(self, job: RateJob, channel: MultipoleChannel, i, f, spectra) -> RateResult | None:
        if self.cache is not None:
            cached = self.cache.load_rate(job, channel.name)
            if cached is not None:
                self._log(f"  {channel.name}: from cache")
                return cached
        result = total_rate(channel, i, f, spectra, job.quad_points, cancel=self._cancelled.is_set)
        if result is not None and self.cache is not None:
            self.cache.store_rate(job, result)
        return result

    def run_job(self, job: RateJob) -> JobOutcome:
        outcome = JobOutcome(job)
        if self.cache is not None:
            cached = [self.cache.load_rate(job, ch.name) for ch in job.channels]
            if all(r is not None for r in cached):
                outcome.results = cached
                outcome.cached = True
                return outcome
        try:
            spectra = dict(zip(job.kappas, self._map(lambda k: self.spectrum(job, k), job.kappas)))
            i, f = transition_states(spectra, job.initial, job.final)
            results = self._map(lambda ch: self._channel(job, ch, i, f, spectra), list(job.channels))
            if any(r is None for r in results):
                outcome.error = "cancelled"
            outcome.results = [r for r in results if r is not None]
        except (TpdcError, SpuriousStateWarning) as e:
            logger.error("%s: %s", job.label, e)
            outcome.error = f"{type(e).__name__}: {e}"
        return outcome

    def run(self):
        total = len(self.jobs)
        self.outcomes = []
        for idx, job in enumerate(self.jobs, 1):
            if self.cancelled:
                self._log("--- Rate run cancelled ---")
                break
            self.job_started.emit(idx, total, job.label)
            outcome = self.run_job(job)
            if outcome.cached:
                self._log(f"[{idx}/{total}] SKIP (cached): {job.label}")
            elif outcome.success:
                self._log(f"[{idx}/{total}] DONE: {job.label}")
            else:
                self._log(f"[{idx}/{total}] FAILED: {job.label}: {outcome.error}")
            self.outcomes.append(outcome)
            self.job_finished.emit(idx, total, job.label, outcome.success)
        if not self.cancelled:
            self._log("=== All jobs done. ===")
        self.done.emit()
        return self.outcomes
