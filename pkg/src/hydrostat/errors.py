"""Exception hierarchy shared by all hydrostat modules."""


class HydrostatError(Exception):
    """Base class for every error raised by this package."""


class InputError(HydrostatError, ValueError):
    """Malformed or out-of-range input data."""


class PipelineError(HydrostatError):
    """A processing stage could not produce a result."""


# geometry
class TooFewPoints(InputError):
    pass


class DegenerateConfiguration(InputError):
    pass


class PointAtInfinity(PipelineError):
    pass


class ZeroBaseline(InputError):
    pass


class VerificationFailed(PipelineError):
    pass


class RayAboveHorizon(PipelineError):
    pass


class RegionOutsideView(PipelineError):
    pass


# mask quality
class EmptyRoi(InputError):
    pass


class InsufficientWaterColumns(PipelineError):
    pass


# stiv
class LineOutOfBounds(InputError):
    pass


# kde
class TooFewSamples(InputError):
    pass


class EmptyInterval(InputError):
    pass


class DensityUnderflow(PipelineError):
    pass


# imputation
class NoUsablePairs(PipelineError):
    pass


class NoObservations(PipelineError):
    pass


class DisconnectedMissingNode(PipelineError):
    pass


class LevelOutOfRange(InputError):
    pass


# rating curve
class RankDeficient(PipelineError):
    pass


class TooFewInliers(PipelineError):
    pass


class NonPositiveBase(PipelineError):
    pass


class DuplicateControls(InputError):
    pass


# synthetic scenes
class SpecOutOfRange(InputError):
    pass


class AdvectionOutOfFrame(InputError):
    pass
