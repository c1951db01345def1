"""Batch relation extraction with low-noise distant supervision.

The pipeline turns a knowledge base plus dependency-parsed text into
training data and trained relation classifiers:

1. ``kb_store``       -- load and index triples, denotations, signatures.
2. ``gazetteer``      -- per-page surface-string lookup tables.
3. ``fact_index``     -- Bloom-filter fact membership + label decisions.
4. ``resolver``       -- greedy mention resolution and pair labeling.
5. ``features``       -- dependency-path feature token extraction.
6. ``classifiers``    -- hashed-ngram linear model and MaxEnt.
7. ``evaluation``     -- P/R/F harness, trials, experiment matrix.
8. ``cli``            -- one executable wiring the stages via files.
"""

from relex.kb_store import Fact, KnowledgeBase, LoadReport, RelationSignature, load_kb
from relex.gazetteer import Gazetteer, build_page_gazetteer, normalize_surface
from relex.fact_index import BloomFilter, LabelDecision, LookupVia, Verdict, decide_label
from relex.conllu import ParsedSentence, Token, read_conllu, read_corpus
from relex.resolver import LabeledPair, Mention, annotate_page, resolve_mentions, sample_negatives
from relex.features import (
    BrownClusters,
    FeatureConfig,
    GroupedExample,
    PathNode,
    Support,
    brown_prefix4,
    extract_path,
    group_supports,
    render_support,
    select_top_supports,
)
from relex.classifiers import (
    FeatureExample,
    MaxEntModel,
    NgramLinearModel,
    TrainConfig,
    train_maxent,
    train_ngram_linear,
)
from relex.evaluation import EvalReport, ExperimentPlan, evaluate, run_matrix, run_trials

__version__ = "0.1.0"
