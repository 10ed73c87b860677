"""Clinical-guideline text to a validated medical-indicator knowledge graph."""

from .config import PipelineConfig
from .corpus import Chunk, GuidelineDocument, chunk_document, load_document, preprocess
from .embeddings import HashingEmbedder, cosine
from .extraction import CandidateTriple, ExtractionIntent, PromptTemplate, align_candidates
from .fusion import AliasTable, SourcePriority, fuse, normalize_mention
from .graph import Edge, GraphStore, Node, Provenance
from .ontology import OntologySchema, check_graph_constraints, default_schema, load_schema, validate_triple
from .pipeline import Pipeline
from .qa import Question, answer_question, retrieve_context
from .ranges import ReferenceRange, Verdict, classify, parse_reference_range, render
from .review import ReviewQueue, TemplateRegistry, compute_stats
from .vindex import VectorIndex

__version__ = "0.1.0"
