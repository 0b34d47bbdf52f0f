"""Data-driven l-complete abstractions with scenario certificates."""
from .behavior import ABS, PAD, ExternalBehavior, FiniteTS, LSequence, split_windows
from .pac import PacCertificate, certify, epsilon, inflate
from .salca import Salca, WindowSet, build_salca, collect_windows, exact_salca
from .sampler import Dataset, SampleConfig, sample_dataset
from .synthesis import AbstractController, ReachAvoidSpec, refine_and_run, solve_reach_avoid
from .systems import LinearSystem, MountainCar, ZeroOrderHold, make_system

__version__ = "0.1.0"

__all__ = ["ABS", "PAD", "ExternalBehavior", "FiniteTS", "LSequence", "split_windows",
           "PacCertificate", "certify", "epsilon", "inflate", "Salca", "WindowSet",
           "build_salca", "collect_windows", "exact_salca", "Dataset", "SampleConfig",
           "sample_dataset", "AbstractController", "ReachAvoidSpec", "refine_and_run",
           "solve_reach_avoid", "LinearSystem", "MountainCar", "ZeroOrderHold", "make_system"]
