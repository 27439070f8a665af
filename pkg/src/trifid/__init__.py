"""Structural fidelity scoring for translated Markdown documentation."""
from trifid.extract import CATEGORIES, CodeBlock, DocumentStructure, extract_structure, extract_urls, normalize_code
from trifid.score import FidelityReport, score_code, score_markdown, score_pair, score_structures, score_url

__version__ = "0.1.0"
