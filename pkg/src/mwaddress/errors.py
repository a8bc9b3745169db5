"""Exception hierarchy shared by the simulation modules."""


class SimulationError(Exception):
    """Base class for errors raised by mwaddress."""


class InvalidDimensionError(SimulationError, ValueError):
    pass


class InvalidParameterError(SimulationError, ValueError):
    pass


class InvalidOrderError(SimulationError, ValueError):
    pass


class ScheduleInfeasibleError(SimulationError, ValueError):
    """A pulse schedule cannot satisfy its timing constraints."""

    def __init__(self, constraint: str):
        super().__init__(f"schedule infeasible: {constraint}")
        self.constraint = constraint


class InfeasibleCompensationError(SimulationError, ValueError):
    pass


class SingularPositionError(SimulationError, ValueError):
    pass


class InvalidInputError(SimulationError, ValueError):
    pass


class IntegrationError(SimulationError, RuntimeError):
    """The ODE integrator failed; ``time`` is where it stopped."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t = {time:.6g} s)")
        self.time = time


class ConvergenceError(SimulationError, RuntimeError):
    """Fock truncation guard breached: doubling the cutoff moved an observable."""

    def __init__(self, observable: str, deviation: float, tolerance: float):
        super().__init__(
            f"truncation guard failed for {observable}: "
            f"change {deviation:.3e} exceeds {tolerance:.1e}"
        )
        self.observable = observable
        self.deviation = deviation
        self.tolerance = tolerance


class TruncationWarning(UserWarning):
    pass
