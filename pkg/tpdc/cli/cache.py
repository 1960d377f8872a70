"""
On-disk cache of Dirac spectra and channel rates.

Entries are JSON files named by a SHA-256 key over everything that
changes the numbers: nuclear charge and model, kappa, basis (including
knots), digits, speed of light, eigensolver and boundary variant.
Rates additionally key on channel, quadrature size and the transition.
"""

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from tpdc.core.basis import BasisSpec, NuclearModel
from tpdc.core.dirac import DiracSpectrum
from tpdc.core.twophoton import RateResult

logger = logging.getLogger(__name__)

CACHE_FORMAT = 1


def find_cache_dir() -> Path:
    """
    Locate the cache directory. Checks:
    1. TPDC_CACHE_DIR
    2. $XDG_CACHE_HOME/tpdc
    3. ~/.cache/tpdc
    """
    explicit = os.environ.get("TPDC_CACHE_DIR")
    if explicit:
        return Path(explicit).expanduser()
    xdg = os.environ.get("XDG_CACHE_HOME")
    if xdg:
        return Path(xdg).expanduser() / "tpdc"
    return Path.home() / ".cache" / "tpdc"


def _digest(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:32]


def spectrum_key_fields(spec: BasisSpec, nuc: NuclearModel, kappa: int, digits: int, c: str,
                        solver: str, bond_variant: str) -> dict:
    return {
        "format": CACHE_FORMAT,
        "basis": spec.describe(),
        "nucleus": nuc.describe(),
        "kappa": int(kappa),
        "digits": int(digits),
        "c": str(c),
        "solver": solver,
        "bond_variant": bond_variant,
    }


def spectrum_key(*args) -> str:
    """Cache key of a spectrum; same arguments as spectrum_key_fields."""
    return _digest(spectrum_key_fields(*args))


@dataclass(frozen=True)
class CacheEntry:
    kind: str           # "spectrum" or "rate"
    key: str
    size: int
    summary: str


class SpectrumCache:
    """Spectra and rate results under one directory."""

    def __init__(self, root: Path | str | None = None):
        self.root = Path(root) if root is not None else find_cache_dir()

    def _path(self, kind: str, key: str) -> Path:
        return self.root / kind / f"{key}.json"

    def _read(self, path: Path) -> dict | None:
        try:
            with path.open(encoding="utf-8") as fh:
                return json.load(fh)
        except FileNotFoundError:
            return None
        except (OSError, json.JSONDecodeError) as e:
            logger.warning("ignoring unreadable cache entry %s: %s", path, e)
            return None

    def _write(self, path: Path, payload: dict):
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(suffix=".tmp", prefix=path.stem, dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, sort_keys=True, indent=1)
            os.replace(tmp, path)
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise

    # ── Spectra ───────────────────────────────────────────────────────

    def load_spectrum(self, spec, nuc, kappa, digits, c, solver, bond_variant) -> DiracSpectrum | None:
        fields = spectrum_key_fields(spec, nuc, kappa, digits, c, solver, bond_variant)
        key = _digest(fields)
        data = self._read(self._path("spectra", key))
        if data is None or data.get("key") != fields:
            logger.debug("spectrum cache miss %s", key)
            return None
        logger.info("spectrum cache hit: kappa=%d Z=%s (%s)", kappa, nuc.Z, key)
        return DiracSpectrum.from_dict(data["spectrum"])

    def store_spectrum(self, spectrum: DiracSpectrum, solver: str):
        fields = spectrum_key_fields(spectrum.spec, spectrum.nuc, spectrum.kappa.kappa, spectrum.digits,
                                     spectrum.c, solver, spectrum.bond_variant)
        key = _digest(fields)
        self._write(self._path("spectra", key), {"key": fields, "spectrum": spectrum.to_dict()})
        logger.debug("stored spectrum %s", key)

    # ── Rates ─────────────────────────────────────────────────────────

    @staticmethod
    def rate_key_fields(job, channel: str) -> dict:
        return {
            "format": CACHE_FORMAT,
            "basis": job.spec.describe(),
            "nucleus": job.nuc.describe(),
            "digits": int(job.digits),
            "c": str(job.c),
            "solver": job.solver,
            "bond_variant": job.bond_variant,
            "channel": channel,
            "quad_points": int(job.quad_points),
            "initial": list(job.initial),
            "final": list(job.final),
        }

    def load_rate(self, job, channel: str) -> RateResult | None:
        fields = self.rate_key_fields(job, channel)
        data = self._read(self._path("rates", _digest(fields)))
        if data is None or data.get("key") != fields:
            return None
        return RateResult.from_dict(data["result"])

    def store_rate(self, job, result: RateResult):
        fields = self.rate_key_fields(job, result.channel)
        self._write(self._path("rates", _digest(fields)), {"key": fields, "result": result.to_dict()})

    # ── Maintenance ───────────────────────────────────────────────────

    def entries(self) -> list:
        out = []
        for kind, folder in (("spectrum", "spectra"), ("rate", "rates")):
            for path in sorted((self.root / folder).glob("*.json")):
                data = self._read(path) or {}
                key = data.get("key", {})
                if kind == "spectrum":
                    summary = (f"Z={key.get('nucleus', {}).get('Z')} kappa={key.get('kappa')} "
                               f"{key.get('basis', {}).get('kind')} N={key.get('basis', {}).get('count')} "
                               f"digits={key.get('digits')}")
                else:
                    summary = (f"Z={key.get('nucleus', {}).get('Z')} {key.get('channel')} "
                               f"N={key.get('basis', {}).get('count')} digits={key.get('digits')}")
                out.append(CacheEntry(kind, path.stem, path.stat().st_size, summary))
        return out

    def evict(self, keys=None) -> int:
        """Delete the given entry keys (all entries when None); returns the count removed."""
        removed = 0
        wanted = None if keys is None else set(keys)
        for folder in ("spectra", "rates"):
            for path in (self.root / folder).glob("*.json"):
                if wanted is None or path.stem in wanted:
                    path.unlink()
                    removed += 1
        logger.info("evicted %d cache entries from %s", removed, self.root)
        return removed
