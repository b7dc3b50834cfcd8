"""Channel generators and CSV/JSON channel files.

Random channels draw each row from the flat Dirichlet distribution using
numpy's PCG64 generator (``numpy.random.default_rng(seed)``), so a seed
fully determines the channel.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .errors import BlahutError, DimensionMismatch
from .info import Channel, Distribution, kl_divergence


class ChannelFormatError(BlahutError, ValueError):
    """A channel or distribution file could not be parsed."""


def random_channel(m: int, n: int, seed: int) -> Channel:
    rng = np.random.default_rng(seed)
    return Channel(rng.dirichlet(np.ones(n), size=m), name=f"random-{m}x{n}-seed{seed}")


def random_ensemble(seed: int, count: int, m_range: tuple[int, int], n_range: tuple[int, int]):
    """``count`` draws of ``(m, n, channel_seed)`` from a master generator.

    Sizes are uniform on the inclusive ranges; each channel seed is a
    63-bit integer, so :func:`random_channel` can rebuild channel ``k``
    without the rest of the ensemble.
    """
    master = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        m = int(master.integers(m_range[0], m_range[1] + 1))
        n = int(master.integers(n_range[0], n_range[1] + 1))
        out.append((m, n, int(master.integers(0, 2**63 - 1))))
    return out


def bsc(delta: float) -> Channel:
    return Channel([[1 - delta, delta], [delta, 1 - delta]], name=f"bsc-{delta:g}")


def identity(m: int) -> Channel:
    return Channel(np.eye(m), name=f"identity-{m}")


def duplicate_rows(channel: Channel, rows) -> Channel:
    """Append copies of the given rows. The iteration keeps the mass ratio
    between a row and its copy fixed, so it behaves exactly as on the
    original channel with the two masses merged."""
    w = np.vstack([channel.w, channel.w[list(rows)]])
    return Channel(w, name=f"{channel.name or 'channel'}-dup")


def tight_row(q_star: np.ndarray, c_star: float) -> np.ndarray:
    """A row ``r`` with ``D(r || q*) = C*``, on the segment from ``q*`` to its rarest output.

    Appending ``r`` to a channel with optimum ``(p*, q*, C*)`` leaves that
    optimum in place and makes the new index tight with zero mass (Type II).
    """
    q_star = np.asarray(q_star, dtype=float)
    vertex = np.zeros_like(q_star)
    vertex[int(np.argmin(q_star))] = 1.0

    def excess(lam: float) -> float:
        return kl_divergence((1 - lam) * q_star + lam * vertex, q_star) - c_star

    if excess(1.0) < 0:
        raise ValueError("no row on this segment reaches the capacity")
    lam = brentq(excess, 0.0, 1.0, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)
    return (1 - lam) * q_star + lam * vertex


def dup_row_channel(delta: float = 0.3, rare: float = 1e-4):
    """4x3 channel with a duplicated row and a Type II index, plus its optimum.

    Rows 0 and 1 are a binary symmetric channel with crossover ``delta`` that
    leaks probability ``rare`` into a third output; by symmetry the optimum
    is ``p* = (1/2, 1/2, 0, 0)``. Row 2 is a tight row toward the rare
    output and row 3 repeats row 0, so with respect to ``p*`` index 2 and
    index 3 are both Type II. Index 2 is not in the span of the other rows,
    so the optimal output law cannot be reached through it: the iteration
    decays like a power of t near the optimum instead of geometrically.

    Returns ``(channel, p_star, c_star)``.
    """
    if not 0 < delta < 0.5 or not 0 < rare < 1 - 2 * delta:
        raise ValueError("need 0 < delta < 1/2 and 0 < rare < 1 - 2 delta")
    base = np.array([[1 - delta - rare, delta, rare], [delta, 1 - delta - rare, rare]])
    q_star = np.array([(1 - rare) / 2, (1 - rare) / 2, rare])
    c_star = kl_divergence(base[0], q_star)
    w = np.vstack([base, tight_row(q_star, c_star), base[0]])
    channel = Channel(w, name=f"dup-row-{delta:g}")
    return channel, Distribution([0.5, 0.5, 0.0, 0.0]), c_star


# -- files -------------------------------------------------------------------

def fmt_float(x: float) -> str:
    """17 significant digits: round-trips any double."""
    return f"{x:.17g}"


def _matrix(rows, source: str) -> np.ndarray:
    try:
        data = [[float(v) for v in row] for row in rows]
    except (TypeError, ValueError) as exc:
        raise ChannelFormatError(f"{source}: non-numeric cell ({exc})") from None
    if not data:
        raise ChannelFormatError(f"{source}: no rows")
    widths = {len(r) for r in data}
    if len(widths) != 1:
        raise DimensionMismatch(f"{source}: rows of unequal length {sorted(widths)}")
    return np.array(data)


def read_channel(path, fmt: str | None = None) -> Channel:
    """Load a channel from CSV (one row per input, no header) or JSON."""
    path = Path(path)
    fmt = fmt or ("json" if path.suffix.lower() == ".json" else "csv")
    try:
        text = path.read_text()
    except OSError as exc:
        raise ChannelFormatError(f"{path}: {exc.strerror}") from None
    if fmt == "csv":
        rows = [r for r in csv.reader(text.splitlines()) if r and any(c.strip() for c in r)]
        return Channel(_matrix(rows, str(path)), name=path.stem)
    if fmt != "json":
        raise ValueError(f"unknown channel format {fmt!r}")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChannelFormatError(f"{path}: {exc}") from None
    if not isinstance(obj, dict) or "rows" not in obj:
        raise ChannelFormatError(f"{path}: expected an object with 'm', 'n' and 'rows'")
    w = _matrix(obj["rows"], str(path))
    m, n = obj.get("m", w.shape[0]), obj.get("n", w.shape[1])
    if (m, n) != w.shape:
        raise DimensionMismatch(f"{path}: declared {m}x{n} but rows are {w.shape[0]}x{w.shape[1]}")
    return Channel(w, name=obj.get("name") or path.stem)


def write_channel(channel: Channel, path, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = fmt or ("json" if path.suffix.lower() == ".json" else "csv")
    rows = [[fmt_float(v) for v in row] for row in channel.w]
    if fmt == "csv":
        path.write_text("".join(",".join(r) + "\n" for r in rows))
        return
    # Numbers are spliced in as text to keep the 17-digit representation.
    body = ",\n    ".join("[" + ", ".join(r) + "]" for r in rows)
    name = json.dumps(channel.name)
    path.write_text(
        f'{{\n  "name": {name},\n  "m": {channel.m},\n  "n": {channel.n},\n  "rows": [\n    {body}\n  ]\n}}\n'
    )


def read_distribution(path) -> Distribution:
    """A distribution from a one-line CSV or a JSON list / ``{"p": [...]}``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ChannelFormatError(f"{path}: {exc.strerror}") from None
    if path.suffix.lower() == ".json":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ChannelFormatError(f"{path}: {exc}") from None
        values = obj.get("p") if isinstance(obj, dict) else obj
    else:
        values = [c for r in csv.reader(text.splitlines()) for c in r if c.strip()]
    try:
        return Distribution([float(v) for v in values])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, BlahutError):
            raise
        raise ChannelFormatError(f"{path}: {exc}") from None
