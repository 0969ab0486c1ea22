"""Sharp moderate and large deviations of log|P_N(1)| for circular beta ensembles."""

__version__ = "0.1.0"
