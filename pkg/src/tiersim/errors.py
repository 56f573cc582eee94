"""Exception types shared across the simulator."""


class SimulationError(Exception):
    """Base class for all simulator errors."""


class ConfigError(SimulationError):
    """Scenario or parameter validation failed before the run started."""


class AlreadyMapped(SimulationError):
    """Guest page table insert would violate injectivity."""


class GuestUnmapped(SimulationError):
    """Translation requested for a GVA with no guest mapping."""


class HostUnmapped(SimulationError):
    """A mapped GPA region has no host placement (placement bug)."""


class UnknownConfiguration(SimulationError):
    """Page-walk cost requested for a page-size combination not in the table."""


class OutOfMemory(SimulationError):
    """Allocation failed: consolidation reserve or host frames exhausted."""


class UnmappedAddress(SimulationError):
    """A trace referenced a GVA page that is not mapped."""

    def __init__(self, gva: int):
        super().__init__(f"access to unmapped guest page {gva}")
        self.gva = gva


class EmptyReport(SimulationError):
    """A hotness report with no hot pages cannot produce a CDF."""


class DestinationFull(SimulationError):
    """Migration target tier has no free frame (policy must pre-free)."""


class ParseError(SimulationError):
    """Trace file line could not be parsed."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class InvariantViolation(SimulationError):
    """A mid-run consistency check failed; the run state is untrustworthy."""
