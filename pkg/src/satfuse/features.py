"""Handcrafted feature catalog: plane statistics, DCT descriptor,
co-occurrence (Haralick/CCM) texture features and vegetation indices.

Catalog layout (150 entries, see docs/feature_catalog.md):
    * H, S, I, NIR: mean, std, variance, moment2, dct            -> 20
    * H, S, I, NIR: 11 stats of the accumulated symmetric CCM    -> 44
    * H, S, I, NIR x 4 single offsets: contrast, moment2,
      entropy, homogeneity                                       -> 64
    * R, G, B: mean, std, variance, moment2, dct                 -> 15
    * cross-band correlation of R, G, B with NIR                 ->  3
    * NDVI, EVI, ARVI, SR                                        ->  4

Feature names use ``<channel>.<source>.<statistic>`` (indices are bare
names), e.g. ``I.ccm.mean``, ``H.plane.std``, ``S.ccm_1_m1.contrast``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dctn

from .colorspace import rgb_to_hsi
from .dataset import to_unit
from .errors import ConfigError, DegenerateInputError

CCM_LEVELS = 8
CCM_OFFSETS = ((0, 1), (1, 0), (1, 1), (1, -1))

CCM_STATS = (
    "mean", "autoc", "contrast", "correlation", "covariance", "moment2",
    "entropy", "homogeneity", "maxprob", "sosvh", "variance",
)
OFFSET_STATS = ("contrast", "moment2", "entropy", "homogeneity")
PLANE_STATS = ("mean", "std", "variance", "moment2")
INDEX_NAMES = ("NDVI", "EVI", "ARVI", "SR")


def plane_stats(plane: np.ndarray) -> dict:
    """Population mean/std/variance and raw second moment of a plane."""
    plane = np.asarray(plane, dtype=np.float64)
    if plane.size == 0:
        raise DegenerateInputError("empty plane")
    mean = plane.mean()
    variance = plane.var()
    return {
        "mean": mean,
        "std": np.sqrt(variance),
        "variance": variance,
        "moment2": np.mean(plane * plane),
    }


def dct_feature(plane: np.ndarray) -> float:
    """Mean absolute AC coefficient of the orthonormal 2-D DCT-II.

    Invariant to constant offsets (the DC coefficient is excluded), so a
    constant plane scores exactly 0.
    """
    plane = np.asarray(plane, dtype=np.float64)
    if plane.size == 0:
        raise DegenerateInputError("empty plane")
    if plane.size == 1:
        return 0.0
    coeffs = dctn(plane, norm="ortho")
    total = np.abs(coeffs).sum() - abs(coeffs.flat[0])
    return float(total / (plane.size - 1))


def quantize(plane: np.ndarray, levels: int = CCM_LEVELS) -> np.ndarray:
    """Map [0,1] values to integer levels 0..levels-1 (floor, clamped at top)."""
    if levels < 2:
        raise ValueError("need at least 2 levels")
    q = np.floor(np.asarray(plane, dtype=np.float64) * levels).astype(np.int64)
    return np.clip(q, 0, levels - 1)


@dataclass
class CooccurrenceMatrix:
    """Normalized joint distribution of level pairs at fixed offsets."""

    p: np.ndarray
    levels: int
    offsets: tuple
    symmetric: bool


def cooccurrence(grid, offsets=CCM_OFFSETS, symmetric=True, levels=CCM_LEVELS):
    """Count level pairs (grid[y,x], grid[y+dy,x+dx]) over all offsets.

    With ``symmetric`` the transposed counts are added before
    normalization. The result always sums to 1.
    """
    grid = np.asarray(grid, dtype=np.int64)
    if grid.size == 0 or not offsets:
        raise DegenerateInputError("empty grid or offset list")
    h, w = grid.shape
    counts = np.zeros((levels, levels), dtype=np.float64)
    any_pairs = False
    for dy, dx in offsets:
        y0, y1 = max(0, -dy), min(h, h - dy)
        x0, x1 = max(0, -dx), min(w, w - dx)
        if y0 >= y1 or x0 >= x1:
            continue
        any_pairs = True
        a = grid[y0:y1, x0:x1].ravel()
        b = grid[y0 + dy:y1 + dy, x0 + dx:x1 + dx].ravel()
        counts += np.bincount(a * levels + b, minlength=levels * levels).reshape(
            levels, levels)
    if not any_pairs:
        raise DegenerateInputError("no valid pixel pair for any offset")
    if symmetric:
        counts = counts + counts.T
    counts /= counts.sum()
    return CooccurrenceMatrix(counts, levels, tuple(offsets), symmetric)


def haralick(ccm: CooccurrenceMatrix) -> dict:
    """Texture statistics of a normalized co-occurrence matrix.

    ``moment2`` is the angular second moment (energy); ``sosvh`` is the
    sum-of-squares variance of the i+j marginal.
    """
    p = ccm.p
    total = p.sum()
    if abs(total - 1.0) > 1e-9 or (p < 0).any():
        raise ValueError("co-occurrence matrix is not normalized")
    levels = p.shape[0]
    i = np.arange(levels, dtype=np.float64)
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    mu_x = float(i @ px)
    mu_y = float(i @ py)
    sigma_x = float(np.sqrt(((i - mu_x) ** 2) @ px))
    sigma_y = float(np.sqrt(((i - mu_y) ** 2) @ py))
    ii, jj = np.meshgrid(i, i, indexing="ij")

    autoc = float((ii * jj * p).sum())
    covariance = autoc - mu_x * mu_y
    correlation = covariance / (sigma_x * sigma_y) if sigma_x > 0 and sigma_y > 0 else 0.0

    # i+j marginal for the sum-of-squares variance
    psum = np.zeros(2 * levels - 1)
    np.add.at(psum, (ii + jj).astype(np.int64), p)
    k = np.arange(2 * levels - 1, dtype=np.float64)
    sum_avg = float(k @ psum)
    sosvh = float(((k - sum_avg) ** 2) @ psum)

    nonzero = p[p > 0]
    return {
        "mean": mu_x,
        "autoc": autoc,
        "contrast": float(((ii - jj) ** 2 * p).sum()),
        "correlation": correlation,
        "covariance": covariance,
        "moment2": float((p * p).sum()),
        "entropy": float(-(nonzero * np.log(nonzero)).sum()),
        "homogeneity": float((p / (1.0 + np.abs(ii - jj))).sum()),
        "maxprob": float(p.max()),
        "sosvh": sosvh,
        "variance": float(((ii - mu_x) ** 2 * p).sum()),
    }


def vegetation_indices(patch: np.ndarray) -> dict:
    """NDVI, EVI, ARVI and simple ratio, averaged over the patch.

    ``patch`` is a unit-scaled H x W x 4 array (R, G, B, NIR). Pixels with
    a vanishing denominator contribute 0; the SR denominator is floored at
    1/255 instead.
    """
    r = patch[..., 0]
    b = patch[..., 2]
    nir = patch[..., 3]

    def safe_ratio(num, den):
        ok = den != 0.0
        return np.where(ok, num / np.where(ok, den, 1.0), 0.0)

    ndvi = safe_ratio(nir - r, nir + r)
    sr = nir / np.maximum(r, 1.0 / 255.0)
    rb = 2.0 * r - b
    arvi = safe_ratio(nir - rb, nir + rb)
    evi = safe_ratio(2.5 * (nir - r), nir + 6.0 * r - 7.5 * b + 1.0)
    return {
        "NDVI": float(ndvi.mean()),
        "EVI": float(evi.mean()),
        "ARVI": float(arvi.mean()),
        "SR": float(sr.mean()),
    }


def _offset_tag(dy, dx):
    def fmt(v):
        return f"m{-v}" if v < 0 else str(v)

    return f"ccm_{fmt(dy)}_{fmt(dx)}"


def catalog_names():
    """Ordered identifiers of the full 150-feature catalog."""
    names = []
    for ch in ("H", "S", "I", "NIR"):
        for stat in PLANE_STATS:
            names.append(f"{ch}.plane.{stat}")
        names.append(f"{ch}.plane.dct")
        for stat in CCM_STATS:
            names.append(f"{ch}.ccm.{stat}")
        for dy, dx in CCM_OFFSETS:
            for stat in OFFSET_STATS:
                names.append(f"{ch}.{_offset_tag(dy, dx)}.{stat}")
    for ch in ("R", "G", "B"):
        for stat in PLANE_STATS:
            names.append(f"{ch}.plane.{stat}")
        names.append(f"{ch}.plane.dct")
    for ch in ("R", "G", "B"):
        names.append(f"{ch}_NIR.cross.correlation")
    names.extend(INDEX_NAMES)
    return names


CATALOG = tuple(catalog_names())

# Table-1 selection, in rank order. "DCT" is mapped to the intensity plane.
SELECTED_22 = (
    "I.ccm.mean",
    "H.ccm.sosvh",
    "H.ccm.autoc",
    "S.ccm.mean",
    "H.ccm.mean",
    "SR",
    "S.ccm.moment2",
    "I.ccm.moment2",
    "I.plane.moment2",
    "I.plane.variance",
    "NIR.plane.std",
    "I.plane.std",
    "H.plane.std",
    "H.plane.mean",
    "I.plane.mean",
    "S.plane.mean",
    "I.ccm.covariance",
    "NIR.plane.mean",
    "ARVI",
    "NDVI",
    "I.plane.dct",
    "EVI",
)


@dataclass
class FeatureVector:
    values: np.ndarray
    names: tuple = field(default=CATALOG)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.values) != len(self.names):
            raise ValueError("values/names length mismatch")


def _cross_correlation(a, b):
    sa, sb = a.std(), b.std()
    if sa == 0.0 or sb == 0.0:
        return 0.0
    return float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb))


def extract_all(patch: np.ndarray) -> FeatureVector:
    """Compute the full 150-feature vector of a byte patch (H x W x 4)."""
    unit = to_unit(patch)
    r, g, b, nir = (unit[..., c] for c in range(4))
    hue, sat, inten = rgb_to_hsi(r, g, b)
    planes = {"H": hue, "S": sat, "I": inten, "NIR": nir, "R": r, "G": g, "B": b}

    values = []
    for ch in ("H", "S", "I", "NIR"):
        plane = planes[ch]
        stats = plane_stats(plane)
        values.extend(stats[s] for s in PLANE_STATS)
        values.append(dct_feature(plane))
        grid = quantize(plane)
        values.extend(haralick(cooccurrence(grid))[s] for s in CCM_STATS)
        for off in CCM_OFFSETS:
            h = haralick(cooccurrence(grid, offsets=(off,), symmetric=False))
            values.extend(h[s] for s in OFFSET_STATS)
    for ch in ("R", "G", "B"):
        stats = plane_stats(planes[ch])
        values.extend(stats[s] for s in PLANE_STATS)
        values.append(dct_feature(planes[ch]))
    for ch in ("R", "G", "B"):
        values.append(_cross_correlation(planes[ch], nir))
    indices = vegetation_indices(unit)
    values.extend(indices[name] for name in INDEX_NAMES)
    return FeatureVector(np.array(values), CATALOG)


def select22(vector: FeatureVector) -> FeatureVector:
    """Project a full catalog vector onto the 22 selected features."""
    lookup = {name: i for i, name in enumerate(vector.names)}
    try:
        idx = [lookup[name] for name in SELECTED_22]
    except KeyError as exc:
        raise ConfigError(f"catalog entry missing: {exc}") from exc
    return FeatureVector(vector.values[idx], SELECTED_22)


def extract_matrix(patches, selected=True):
    """Stack per-patch feature vectors into (N, F); returns (matrix, names)."""
    rows = []
    names = SELECTED_22 if selected else CATALOG
    for patch in patches:
        vec = extract_all(patch)
        if selected:
            vec = select22(vec)
        rows.append(vec.values)
    return np.array(rows).reshape(len(rows), len(names)), names


def fit_feature_scaler(matrix: np.ndarray):
    """Per-feature z-score parameters (mean, std) from training rows only.

    Std is floored at 1e-8 so constant columns map to 0.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape[0] < 2:
        raise DegenerateInputError("need at least 2 vectors to fit a scaler")
    return matrix.mean(axis=0), np.maximum(matrix.std(axis=0), 1e-8)


def apply_feature_scaler(matrix, scaler):
    mean, std = scaler
    return (np.asarray(matrix, dtype=np.float64) - mean) / std
