"""Inverse-Wishart priors on K and U and their conjugate full conditionals."""

from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.stats import invwishart

from st_glmm_tools.config import PriorConfig
from st_glmm_tools.errors import DomainError, UsageError
from st_glmm_tools.model.core import ensure_pd
from st_glmm_tools.models import Propagator


@dataclass(frozen=True)
class PriorSpec:
    """IW(nu_K, Phi_K) on K, IW(nu_U, Phi_U) on U, plug-in sigma2_xi.

    beta is flat unless beta_prior_sd is set; each lambda is Uniform(-1, 1).
    The IW density is proportional to |K|^-(nu + r + 1)/2 exp(-tr(Phi K^-1)/2).
    """

    nu_K: float
    Phi_K: np.ndarray
    nu_U: float
    Phi_U: np.ndarray
    sigma2_xi: float
    beta_prior_sd: float | None = None

    def __post_init__(self):
        r = self.r

        if self.Phi_U.shape != (r, r):
            raise UsageError(f"Phi_U must be {r}x{r}, got {self.Phi_U.shape}")
        if not (self.nu_K > r - 1 and self.nu_U > r - 1):
            raise DomainError(
                f"Degrees of freedom must exceed r - 1 = {r - 1}: "
                + f"{self.nu_K}, {self.nu_U}"
            )
        if not self.sigma2_xi > 0:
            raise DomainError(f"sigma2_xi must be positive: {self.sigma2_xi}")
        if self.beta_prior_sd is not None and not self.beta_prior_sd > 0:
            raise DomainError(f"beta_prior_sd must be positive: {self.beta_prior_sd}")

        ensure_pd(self.Phi_K, "Phi_K")
        ensure_pd(self.Phi_U, "Phi_U")

    @property
    def r(self) -> int:
        return self.Phi_K.shape[0]

    @classmethod
    def from_plugin(
        cls,
        K_hat: np.ndarray,
        U_hat: np.ndarray,
        sigma2_xi: float,
        nu_factor: float = 2.0,
        phi_factor: float | None = None,
        beta_prior_sd: float | None = None,
    ) -> "PriorSpec":
        """Center the priors on plug-in estimates: nu = 2r, Phi = (3r + 1) * plug-in."""

        r = K_hat.shape[0]
        factor = phi_factor if phi_factor is not None else 3.0 * r + 1.0
        nu = nu_factor * r

        return cls(
            nu_K=nu,
            Phi_K=factor * K_hat,
            nu_U=nu,
            Phi_U=factor * U_hat,
            sigma2_xi=sigma2_xi,
            beta_prior_sd=beta_prior_sd,
        )

    @classmethod
    def from_config(
        cls,
        config: PriorConfig,
        r: int,
        K_hat: np.ndarray | None = None,
        U_hat: np.ndarray | None = None,
    ) -> "PriorSpec":
        if K_hat is None or U_hat is None:
            K_hat, U_hat = config.plugin_matrices(r)

        return cls.from_plugin(
            K_hat,
            U_hat,
            config.sigma2_xi,
            config.nu_factor,
            config.phi_factor,
            config.beta_prior_sd,
        )

    @staticmethod
    def _center(nu: float, Phi: np.ndarray) -> np.ndarray:
        # the mean exists only for nu > r + 1, otherwise use the mode
        r = Phi.shape[0]
        if nu > r + 1:
            return Phi / (nu - r - 1)
        return Phi / (nu + r + 1)

    def initial_K(self) -> np.ndarray:
        return self._center(self.nu_K, self.Phi_K)

    def initial_U(self) -> np.ndarray:
        return self._center(self.nu_U, self.Phi_U)

    def to_dict(self) -> dict[str, Any]:
        return {
            "nu_K": self.nu_K,
            "Phi_K": self.Phi_K.tolist(),
            "nu_U": self.nu_U,
            "Phi_U": self.Phi_U.tolist(),
            "sigma2_xi": self.sigma2_xi,
            "beta_prior_sd": self.beta_prior_sd,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PriorSpec":
        return cls(
            nu_K=data["nu_K"],
            Phi_K=np.array(data["Phi_K"], dtype=float),
            nu_U=data["nu_U"],
            Phi_U=np.array(data["Phi_U"], dtype=float),
            sigma2_xi=data["sigma2_xi"],
            beta_prior_sd=data.get("beta_prior_sd"),
        )


def inverse_wishart_draw(df: float, scale: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    r = scale.shape[0]
    draw = np.asarray(invwishart(df=df, scale=scale).rvs(random_state=rng)).reshape(r, r)

    return (draw + draw.T) / 2.0


def sample_K(eta1: np.ndarray, priors: PriorSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw K from IW(nu_K + 1, eta1 eta1' + Phi_K)."""

    return inverse_wishart_draw(
        priors.nu_K + 1.0, np.outer(eta1, eta1) + priors.Phi_K, rng
    )


def innovation_scatter(eta: np.ndarray, propagator: Propagator) -> np.ndarray:
    residuals = eta[1:] - eta[:-1] @ propagator.H.T
    return residuals.T @ residuals


def sample_U(
    eta: np.ndarray,
    propagator: Propagator,
    priors: PriorSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw U from IW(nu_U + T - 1, sum of residual outer products + Phi_U)."""

    T = eta.shape[0]
    if T < 2:
        raise UsageError("Sampling U needs at least two time points")

    return inverse_wishart_draw(
        priors.nu_U + T - 1.0, innovation_scatter(eta, propagator) + priors.Phi_U, rng
    )
