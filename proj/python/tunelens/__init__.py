"""Python access to the tunelens core: studies, synthetic objectives, TPE,
the forest surrogate with TreeSHAP, and the bound advisor."""

from ._core import (
    EXPLORATORY_THRESHOLD,
    REFINED_THRESHOLD,
    Forest,
    InsufficientDataError,
    IoError,
    ParseError,
    Study,
    ValidationError,
    __version__,
    advise,
    analyze,
    evaluate,
    explain,
    ks_uniform_pvalue,
    pearson,
    preset_spec,
    presets,
    render,
    simulate,
    skewness,
    suggest,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
