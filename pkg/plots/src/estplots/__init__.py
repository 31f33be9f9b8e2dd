from .errors import (EmptyLogError, LogFormatError, MissingColumnError,
                     PlotError, SidecarError, SpecFormatError)
from .render import (build_figure, build_series_data, default_sidecar_path,
                     load_log, render)
from .spec import (PlotSpec, Series, bundled_spec_path, list_bundled_specs,
                   load_spec, parse_expression, spec_from_dict, with_paths)

__all__ = [
    "EmptyLogError", "LogFormatError", "MissingColumnError", "PlotError",
    "SidecarError", "SpecFormatError", "PlotSpec", "Series",
    "bundled_spec_path", "list_bundled_specs", "load_spec",
    "parse_expression", "spec_from_dict", "with_paths", "build_figure",
    "build_series_data", "default_sidecar_path", "load_log", "render",
]
