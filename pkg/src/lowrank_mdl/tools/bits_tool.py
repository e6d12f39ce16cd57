from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat, field_validator, model_validator


CoderMode = Literal["predictive", "spherical"]


# ---- Longueurs de code ----

class CodeLength(BaseModel):
    """Ideal Shannon codelength, -log2 P, in (fractional) bits."""

    model_config = ConfigDict(frozen=True)

    bits: NonNegativeFloat = Field(..., description="longueur de code en bits")

    @field_validator("bits")
    @classmethod
    def _finite(cls, value):
        if not np.isfinite(value):
            raise ValueError("codelength must be finite")
        return float(value)

    def __add__(self, other: "CodeLength") -> "CodeLength":
        return CodeLength(bits=self.bits + float(other.bits if isinstance(other, CodeLength) else other))

    __radd__ = __add__

    def __float__(self) -> float:
        return self.bits


ZERO_BITS = CodeLength(bits=0.0)


class QuantizationGrid(BaseModel):
    """Quantization steps for Sigma, U, V and E."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    delta_sigma: PositiveFloat = Field(1e-16, description="pas de diag(Sigma)")
    delta_u: PositiveFloat = Field(..., description="pas des entrées de U")
    delta_v: PositiveFloat = Field(..., description="pas des entrées de V")
    delta_e: PositiveFloat = Field(..., description="pas des entrées de E")

    @classmethod
    def start(cls, m: int, n: int, delta_e: float, delta_sigma: float = 1e-16) -> "QuantizationGrid":
        """Starting grid: delta_u = sqrt(1/m), delta_v = sqrt(1/n)."""
        return cls(delta_sigma=delta_sigma, delta_u=float(np.sqrt(1.0 / m)),
                   delta_v=float(np.sqrt(1.0 / n)), delta_e=delta_e)

    def halved(self) -> "QuantizationGrid":
        """Halve delta_u and delta_v together; delta_sigma and delta_e stay."""
        return self.model_copy(update={"delta_u": self.delta_u / 2.0, "delta_v": self.delta_v / 2.0})


class LaplacianTwoPartModel(BaseModel):
    """Two-part code parameters for one residual sequence."""

    model_config = ConfigDict(frozen=True)

    theta_hat: NonNegativeFloat = Field(..., description="échelle laplacienne du maximum de vraisemblance, moyenne des |résidus|")
    param_bits: NonNegativeFloat = Field(..., description="1/2 log2(nombre d'échantillons)")
    samples: int = Field(..., ge=0)


class BitAllocation(BaseModel):
    """Codelength breakdown of one described model, in bits."""

    model_config = ConfigDict(frozen=True)

    l_u: CodeLength = ZERO_BITS
    l_sigma: CodeLength = ZERO_BITS
    l_v: CodeLength = ZERO_BITS
    l_e: CodeLength
    total: CodeLength

    @model_validator(mode="before")
    @classmethod
    def _fill_total(cls, data):
        if isinstance(data, dict) and data.get("total") is None:
            parts = [data.get(key, ZERO_BITS) for key in ("l_u", "l_sigma", "l_v", "l_e")]
            data = dict(data, total=CodeLength(bits=sum(float(_bits(p)) for p in parts)))
        return data

    @model_validator(mode="after")
    def _check_total(self) -> "BitAllocation":
        parts = self.l_u.bits + self.l_sigma.bits + self.l_v.bits + self.l_e.bits
        if abs(parts - self.total.bits) > 1e-9 * max(1.0, parts):
            raise ValueError(f"total {self.total.bits} differs from the sum of parts {parts}")
        return self

    def as_row(self) -> dict:
        return {"l_u": self.l_u.bits, "l_sigma": self.l_sigma.bits, "l_v": self.l_v.bits,
                "l_e": self.l_e.bits, "total": self.total.bits}


def _bits(value) -> float:
    if isinstance(value, CodeLength):
        return value.bits
    if isinstance(value, dict):
        return float(value["bits"])
    return float(value)
