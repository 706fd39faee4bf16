"""JSON schemas for HMMs, configs, reports and sweep records."""
import math
from typing import Literal

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    PositiveFloat,
    PositiveInt,
    field_validator,
    model_validator,
)

from .hmm import Hmm, check_covariance

DISTORTION_KINDS = ('roi_mean', 'roi_cov', 'prior', 'transition')
METRICS = ('d_hmm', 'l_roi', 'l_trans', 'l_prior')

# metric each distortion kind is calibrated against
MATCHED_METRIC = {
    'roi_mean': 'l_roi',
    'roi_cov': 'l_roi',
    'prior': 'l_prior',
    'transition': 'l_trans',
}


class EmissionSchema(BaseModel):
    """One Gaussian ROI: {"mean": [x, y], "cov": [[a, b], [b, c]]}"""
    model_config = ConfigDict(frozen=True)

    mean: tuple[float, float]
    cov: tuple[tuple[float, float], tuple[float, float]]


class HmmSchema(BaseModel):
    """HMM JSON document."""
    model_config = ConfigDict(frozen=True)

    prior: list[float] = Field(min_length=1)
    transition: list[list[float]]
    emissions: list[EmissionSchema]

    @classmethod
    def from_hmm(cls, h):
        return cls(
            prior=h.prior.tolist(),
            transition=h.transition.tolist(),
            emissions=[EmissionSchema(mean=e.mean.tolist(), cov=e.cov.tolist()) for e in h.emissions],
        )

    def to_hmm(self):
        return Hmm(
            np.array(self.prior),
            np.array(self.transition),
            tuple((e.mean, e.cov) for e in self.emissions),
        )


class VbHyperparams(BaseModel):
    """Conjugate prior settings; None means derive from the data."""
    model_config = ConfigDict(frozen=True)

    dirichlet_prior_conc: PositiveFloat = 1.0
    dirichlet_trans_conc: PositiveFloat = 1.0
    nw_mean: tuple[float, float] | None = None
    nw_beta: PositiveFloat = 1.0
    nw_scale: tuple[tuple[float, float], tuple[float, float]] | None = None
    nw_dof: float = 3.0
    # isotropic covariance (px^2) used when the data hold a single point
    fallback_cov: PositiveFloat = 100.0

    @field_validator('nw_dof')
    @classmethod
    def validate_nw_dof(cls, value):
        if value <= 1.0:
            raise ValueError('nw_dof must exceed D - 1 = 1')
        return value

    @field_validator('nw_scale')
    @classmethod
    def validate_nw_scale(cls, value):
        if value is not None:
            problem = check_covariance(value)
            if problem:
                raise ValueError(f"nw_scale: {problem}")
        return value


class LearnConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    k_min: PositiveInt = 1
    k_max: PositiveInt = 8
    restarts: PositiveInt = 3
    max_iters: PositiveInt = 200
    free_energy_tol: PositiveFloat = 1e-6
    prune_count_threshold: NonNegativeFloat = 1.0

    @model_validator(mode='after')
    def validate_k_range(self):
        if self.k_min > self.k_max:
            raise ValueError(f"k_min ({self.k_min}) exceeds k_max ({self.k_max})")
        return self


class FitConfig(BaseModel):
    """Config file of the fit command."""
    model_config = ConfigDict(frozen=True)

    learn: LearnConfig = Field(default_factory=LearnConfig)
    hp: VbHyperparams = Field(default_factory=VbHyperparams)


class DistortionSpec(BaseModel):
    """{"kind": "...", "parameter": value}; roi limits mean/cov distortion to one ROI."""
    model_config = ConfigDict(frozen=True)

    kind: Literal['roi_mean', 'roi_cov', 'prior', 'transition']
    parameter: NonNegativeFloat
    roi: int | None = None


class GeneratorSpec(BaseModel):
    """Synthetic ground-truth HMMs placed in a face region of the stimulus frame."""
    model_config = ConfigDict(frozen=True)

    count: PositiveInt = 10
    k_choices: list[PositiveInt] = Field(default=[2, 3, 4], min_length=1)
    frame: tuple[PositiveFloat, PositiveFloat] = (512.0, 384.0)
    face_region: tuple[PositiveFloat, PositiveFloat] = (300.0, 350.0)
    # per-axis standard deviation range in pixels
    std_range: tuple[PositiveFloat, PositiveFloat] = (20.0, 60.0)
    # minimum distance between ROI means, in multiples of the largest std
    min_separation: NonNegativeFloat = 0.0
    dirichlet_conc: PositiveFloat = 1.0
    seed: int = 0

    @model_validator(mode='after')
    def validate_geometry(self):
        if self.std_range[0] > self.std_range[1]:
            raise ValueError('std_range must be (low, high)')
        return self


class GroundTruthSource(BaseModel):
    """Either a path to an HMM JSON file or a generator spec."""
    model_config = ConfigDict(frozen=True)

    path: str | None = None
    generator: GeneratorSpec | None = None

    @model_validator(mode='after')
    def validate_one_source(self):
        if (self.path is None) == (self.generator is None):
            raise ValueError('give exactly one of "path" or "generator"')
        return self


def _default_distortion_grids():
    return {
        'roi_mean': [0.0, 2.0, 5.0, 10.0],
        'roi_cov': [0.0, 0.05, 0.1, 0.2],
        'prior': [0.0, 0.05, 0.1, 0.2],
        'transition': [0.0, 0.05, 0.1, 0.2],
    }


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    ground_truths: list[GroundTruthSource] = Field(
        default_factory=lambda: [GroundTruthSource(generator=GeneratorSpec())], min_length=1
    )
    n_grid: list[PositiveInt] = Field(default=[5, 10, 25, 50], min_length=1)
    t_grid: list[PositiveInt] = Field(default=[5, 10, 25], min_length=1)
    trials: PositiveInt = 50
    distortion_grids: dict[str, list[NonNegativeFloat]] = Field(default_factory=_default_distortion_grids)
    learn: LearnConfig = Field(default_factory=LearnConfig)
    hp: VbHyperparams = Field(default_factory=VbHyperparams)
    kld_samples: int = Field(default=2000, ge=2)
    # sequence length for D_HMM in calibration sweeps (no data length exists there)
    calibration_t: PositiveInt = 10
    master_seed: int = 0
    selection: Literal['uniform', 'round_robin'] = 'uniform'
    single_roi: bool = False

    @field_validator('distortion_grids')
    @classmethod
    def validate_distortion_grids(cls, value):
        for kind, grid in value.items():
            if kind not in DISTORTION_KINDS:
                raise ValueError(f"unknown distortion kind {kind!r}")
            if not grid:
                raise ValueError(f"empty parameter grid for {kind!r}")
        return value


class PlotSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    input: str
    x: Literal['N', 'T', 'NT', 'parameter'] = 'N'
    metric: Literal['d_hmm', 'l_roi', 'l_trans', 'l_prior'] = 'd_hmm'
    group: str | None = 'T'
    output: str
    log_x: bool = False

    @model_validator(mode='before')
    @classmethod
    def default_group(cls, data):
        if isinstance(data, dict) and 'group' not in data:
            data = {**data, 'group': {'T': 'N', 'parameter': 'kind'}.get(data.get('x'), 'T')}
        return data

    @model_validator(mode='after')
    def validate_group(self):
        if self.group is not None and self.group == self.x:
            raise ValueError(f"cannot group by the x axis column {self.x!r}")
        return self


class AugmentationPlan(BaseModel):
    """Duplications (source state, new state index) applied in order."""
    model_config = ConfigDict(frozen=True)

    target: Literal['true', 'estimated']
    duplications: list[tuple[int, int]]


class DissimReport(BaseModel):
    """All error metrics between a true and an estimated HMM.

    l_trans and l_prior use the unhalved discrete L1 (range [0, 2]);
    l_roi uses the halved density L1 (range [0, 1]). A prior distortion
    built with a halved L1 of delta therefore reports l_prior = 2 delta.
    """
    model_config = ConfigDict(frozen=True)

    d_hmm: float
    mc_stderr: float
    l_roi: float = Field(ge=0.0, le=1.0)
    l_trans: float = Field(ge=0.0)
    l_prior: float = Field(ge=0.0)
    roi_permutation: list[int]
    roi_augmentation: AugmentationPlan | None = None
    state_permutation: list[int]
    state_augmentation: AugmentationPlan | None = None
    k_true: PositiveInt
    k_est: PositiveInt

    @field_validator('d_hmm')
    @classmethod
    def validate_d_hmm(cls, value):
        if not math.isfinite(value):
            raise ValueError('d_hmm must be finite')
        return value


class LearnResultSchema(BaseModel):
    estimated: HmmSchema
    k_hat: PositiveInt
    free_energy: float
    per_k_free_energy: dict[int, float | None]
    iterations_used: int
    # state count of the winning fit, before pruning
    fit_k: PositiveInt

    @classmethod
    def from_result(cls, result):
        return cls(
            estimated=HmmSchema.from_hmm(result.estimated),
            k_hat=result.k_hat,
            free_energy=result.free_energy,
            per_k_free_energy=result.per_k_free_energy,
            iterations_used=result.iterations_used,
            fit_k=result.fit_k,
        )


class TrialRecord(BaseModel):
    trial_id: int
    gt_id: int
    N: int
    T: int
    seed: int
    k_true: int
    k_hat: int | None = None
    d_hmm: float | None = None
    mc_stderr: float | None = None
    l_roi: float | None = None
    l_trans: float | None = None
    l_prior: float | None = None
    failed: bool = False
    wall_ms: int = 0


class CalibrationRecord(BaseModel):
    trial_id: int
    gt_id: int
    kind: str
    parameter: float
    seed: int
    d_hmm: float | None = None
    mc_stderr: float | None = None
    l_roi: float | None = None
    l_trans: float | None = None
    l_prior: float | None = None
    failed: bool = False
    wall_ms: int = 0


TRIAL_COLUMNS = list(TrialRecord.model_fields)
CALIBRATION_COLUMNS = list(CalibrationRecord.model_fields)
