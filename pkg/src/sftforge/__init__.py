"""sftforge: data preparation for supervised fine-tuning.

Filter conversations, render them to token/label pairs with loss masking,
pack variable-length samples into fixed-capacity buffers with cumulative
segment boundaries, account for corpus token splits, select checkpoints from
benchmark grids, and parse/emit the structured-output wire formats.
"""

from .corpus import (
    Conversation,
    RecordError,
    ReferenceTokenizer,
    Role,
    TokenizerSpec,
    Turn,
    ingest,
)
from .filters import (
    DropReason,
    FilterConfig,
    FilterDecision,
    FilterReport,
    filter_length,
    filter_refusal,
    filter_structure,
    prioritize_sources,
    run_pipeline,
)
from .hpak import HpakError, UnsupportedVersionError, read_hpak_file, write_hpak_file
from .packing import (
    EfficiencyReport,
    OversizedSampleError,
    PackedBatch,
    PackingPlan,
    Strategy,
    efficiency,
    pack,
    plan_packing,
    unpack,
)
from .render import (
    IGNORE_LABEL,
    ChatTemplate,
    NoSupervisedTokensError,
    RenderedSample,
    TokenSplit,
    category_table,
    render,
    token_split,
)
from .selection import (
    ScoreMatrix,
    SelectionResult,
    minmax_normalize,
    select_checkpoint,
    suite_mean,
    total_scores,
)

__version__ = "0.1.0"
