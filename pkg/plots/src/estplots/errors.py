class PlotError(Exception):
    """Base class for everything this package raises on purpose."""


class SpecFormatError(PlotError):
    """Figure spec file is malformed or references unknown fields."""


class LogFormatError(PlotError):
    """CSV log body is not a numeric rectangular table."""


class EmptyLogError(PlotError):
    """CSV log has no data rows; nothing to plot."""


class MissingColumnError(PlotError):
    """A series references a column the CSV header does not have."""

    def __init__(self, column):
        self.column = column
        super().__init__(f"column '{column}' is not in the CSV header")


class SidecarError(PlotError):
    """Run sidecar missing or inconsistent with the requested series."""
