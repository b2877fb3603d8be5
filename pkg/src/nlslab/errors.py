"""Error taxonomy shared by all modules.

Every failure mode carries a short machine-readable ``code`` so the CLI can
map it onto exit codes and JSON diagnostics.
"""


class NlslabError(Exception):
    """Base class; ``code`` is a stable, dash-separated identifier."""

    code = "error"

    def __init__(self, message="", **context):
        super().__init__(message or self.code)
        self.context = context


class SubcriticalDiscrError(NlslabError):
    code = "subcritical-Discr"


class IntegrationFailure(NlslabError):
    code = "integration-failure"


class NotInGroundBranch(NlslabError):
    code = "not-in-ground-branch"


class DegenerateFit(NlslabError):
    code = "degenerate-fit"


class GridTooShort(NlslabError):
    code = "grid-too-short"


class BranchAmbiguous(NlslabError):
    code = "branch-ambiguous"


class MTooSmall(NlslabError):
    code = "M-too-small"


class RecursionDegenerate(NlslabError):
    code = "recursion-degenerate"


class NeedsRefinement(NlslabError):
    code = "needs-refinement"


class DecompositionLost(NlslabError):
    code = "decomposition-lost"


class NotFocusing(NlslabError):
    code = "not-focusing"


class NumericalBreakdown(NlslabError):
    code = "numerical-breakdown"
