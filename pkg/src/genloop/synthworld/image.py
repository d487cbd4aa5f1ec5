import typing as t

import numpy as np
import pydantic

from genloop import errors
from genloop.synthworld import vocab

GRID = 8
MAX_FINDINGS = 6
CELL_STATES = 1 + len(vocab.SHAPES) * len(vocab.INTENSITIES) * len(vocab.SIZES)
"""Empty plus every (shape, intensity, size) combination."""

DEFAULT_MIXTURE: dict[str, float] = {
    'MRI': 0.428,
    'CT': 0.206,
    'Micro': 0.0386,
    **{m: (1.0 - 0.428 - 0.206 - 0.0386) / 5
       for m in ('XRay', 'US', 'Der', 'FP', 'OCT')},
}
"""Training distribution of modalities: MRI and CT dominate, microscopy is
rare, the rest share the remainder evenly."""

SHAPE_PRIORS: dict[str, tuple[float, ...]] = {
    'CT': (0.35, 0.25, 0.20, 0.20),
    'MRI': (0.40, 0.15, 0.15, 0.30),
    'XRay': (0.15, 0.50, 0.25, 0.10),
    'US': (0.45, 0.10, 0.15, 0.30),
    'Der': (0.30, 0.20, 0.10, 0.40),
    'FP': (0.20, 0.10, 0.50, 0.20),
    'OCT': (0.20, 0.10, 0.55, 0.15),
    'Micro': (0.50, 0.20, 0.10, 0.20),
}
"""Per-modality weights over round, spiculated, linear, diffuse."""

INTENSITY_PRIORS: dict[str, tuple[float, ...]] = {
    'CT': (0.30, 0.40, 0.30),
    'MRI': (0.25, 0.35, 0.40),
    'XRay': (0.20, 0.30, 0.50),
    'US': (0.50, 0.35, 0.15),
    'Der': (0.35, 0.40, 0.25),
    'FP': (0.40, 0.40, 0.20),
    'OCT': (0.30, 0.50, 0.20),
    'Micro': (0.30, 0.30, 0.40),
}
LARGE_PROBABILITY = 0.4


class Finding(pydantic.BaseModel):
    """One structured lesion on the grid."""
    model_config = pydantic.ConfigDict(frozen=True)

    shape: t.Literal['round', 'spiculated', 'linear', 'diffuse']
    intensity: t.Literal['low', 'mid', 'high']
    size: t.Literal['small', 'large']
    row: int = pydantic.Field(ge=0, lt=GRID)
    col: int = pydantic.Field(ge=0, lt=GRID)

    @property
    def position(self) -> tuple[int, int]:
        return self.row, self.col

    @property
    def cell_state(self) -> int:
        shape = vocab.SHAPES.index(self.shape)
        intensity = vocab.INTENSITIES.index(self.intensity)
        size = vocab.SIZES.index(self.size)
        return 1 + (shape * len(vocab.INTENSITIES) + intensity) * 2 + size

    def salience(self) -> tuple[int, int, int, int]:
        """Sort key: large before small, brighter first, then row-major."""
        return (
            -vocab.SIZES.index(self.size),
            -vocab.INTENSITIES.index(self.intensity),
            self.row,
            self.col,
        )

    def has(self, attribute: str) -> bool:
        return attribute in (self.shape, self.intensity, self.size)


class SynthImage(pydantic.BaseModel):
    """A structured stand-in for a medical image. Findings are stored in
    salience order, so the first one is the largest."""
    model_config = pydantic.ConfigDict(frozen=True)

    seed: int
    modality: t.Literal['CT', 'MRI', 'XRay', 'US', 'Der', 'FP', 'OCT', 'Micro']
    findings: tuple[Finding, ...]

    @pydantic.model_validator(mode='after')
    def _check(self) -> 'SynthImage':
        if not 1 <= len(self.findings) <= MAX_FINDINGS:
            raise ValueError('an image holds 1 to 6 findings')
        positions = {f.position for f in self.findings}
        if len(positions) != len(self.findings):
            raise ValueError('two findings share a cell')
        return self

    @property
    def largest(self) -> Finding:
        return self.findings[0]

    @property
    def grid(self) -> np.ndarray:
        """The 8x8 grid of cell states, 0 meaning empty."""
        cells = np.zeros((GRID, GRID), dtype=np.int64)
        for finding in self.findings:
            cells[finding.row, finding.col] = finding.cell_state
        return cells


def validate_mixture(mixture: t.Mapping[str, float]) -> np.ndarray:
    """Check a modality mixture and return it as a vector in modality
    order.

    Raises:
        errors.ConfigError: on unknown modalities, negative mass, or a sum
            differing from one by more than 1e-9.
    """
    unknown = set(mixture) - set(vocab.MODALITIES)
    if unknown:
        raise errors.ConfigError(f'unknown modalities {sorted(unknown)}')
    weights = np.array(
        [float(mixture.get(m, 0.0)) for m in vocab.MODALITIES])
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise errors.ConfigError('mixture weights must be non-negative')
    if abs(weights.sum() - 1.0) > 1e-9:
        raise errors.ConfigError(
            f'mixture sums to {weights.sum()!r}, expected 1')
    return weights


def _pick_modality(u: float, weights: np.ndarray) -> str:
    cumulative = np.cumsum(weights)
    index = int(np.searchsorted(cumulative, u, side='right'))
    index = min(index, int(np.flatnonzero(weights)[-1]))
    return vocab.MODALITIES[index]


def image_for(seed: int, modality: str) -> SynthImage:
    """Rebuild the image drawn for `seed` once its modality is known. The
    findings depend on the seed and modality only, never on the mixture."""
    rng = np.random.default_rng(seed)
    rng.random()  # the modality draw
    count = int(rng.integers(1, MAX_FINDINGS + 1))
    cells = rng.choice(GRID * GRID, size=count, replace=False)
    shapes = rng.choice(
        len(vocab.SHAPES), size=count, p=SHAPE_PRIORS[modality])
    intensities = rng.choice(
        len(vocab.INTENSITIES), size=count, p=INTENSITY_PRIORS[modality])
    large = rng.random(count) < LARGE_PROBABILITY
    findings = [
        Finding(
            shape=vocab.SHAPES[shapes[i]],
            intensity=vocab.INTENSITIES[intensities[i]],
            size='large' if large[i] else 'small',
            row=int(cells[i]) // GRID,
            col=int(cells[i]) % GRID,
        )
        for i in range(count)
    ]
    findings.sort(key=Finding.salience)
    return SynthImage(seed=seed, modality=modality, findings=tuple(findings))


def sample_image(
    seed: int,
    mixture: t.Mapping[str, float] | None = None,
) -> SynthImage:
    """Draw an image deterministically from `(seed, mixture)`.

    Raises:
        errors.ConfigError: when the mixture is invalid.
    """
    weights = validate_mixture(
        DEFAULT_MIXTURE if mixture is None else mixture)
    rng = np.random.default_rng(seed)
    modality = _pick_modality(float(rng.random()), weights)
    return image_for(seed, modality)
