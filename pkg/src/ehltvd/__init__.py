"""TVD-limited multigrid solvers for the EHL point contact and its linear
convection-diffusion model problem."""

__version__ = "0.1.0"
