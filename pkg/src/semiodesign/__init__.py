"""Sign systems, semiotic morphisms, life-cycle semiosis laws and product simulation."""

from .errors import Diagnostic, EngineError
from .morphism import (
    SemioticMorphism,
    apply_morphism,
    compose,
    epsilon,
    identity,
    is_isomorphism,
    is_level_preserving,
    is_natural,
    validate_morphism,
)
from .semiosis import (
    check_law_one,
    check_law_two,
    check_laws,
    collapse_past,
    make_component,
    make_sequence,
    sample_trajectory,
    selection,
    synchronic_variety,
    variation,
)
from .sgn_dsl import load_file, parse, serialize
from .sign_algebra import Configuration, SignSystem, validate_config, validate_system

__version__ = "0.1.0"

__all__ = [
    "Configuration", "Diagnostic", "EngineError", "SemioticMorphism", "SignSystem",
    "apply_morphism", "check_law_one", "check_law_two", "check_laws", "collapse_past", "compose",
    "epsilon", "identity", "is_isomorphism", "is_level_preserving", "is_natural", "load_file",
    "make_component", "make_sequence", "parse", "sample_trajectory", "selection", "serialize",
    "synchronic_variety", "validate_config", "validate_morphism", "validate_system", "variation",
]
