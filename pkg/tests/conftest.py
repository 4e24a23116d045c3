"""Shared fixtures: an on-disk demo corpus, a scripted mock LLM, and a local
mock SPARQL endpoint."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

PAPERS = [
    {
        "paper_id": "sparse-attn",
        "title": "Sparse Attention for Long Documents",
        "authors": "Ana Ruiz; Ben Okafor",
        "venue": "TestConf",
        "year": 2023,
        "abstract": "We study sparse attention patterns for long document processing.",
        "sections": [
            ("Introduction", "Attention cost grows quadratically with sequence length. Sparse patterns reduce this cost. We evaluate several fixed patterns on long documents."),
            ("Method", "Our method keeps a sliding window over recent tokens. Global tokens attend everywhere. The pattern is fixed before training begins."),
            ("Results", "Sparse attention matches dense quality on long inputs. Memory usage drops by an order of magnitude. Throughput improves accordingly."),
        ],
    },
    {
        "paper_id": "dense-ret",
        "title": "Dense Retrieval at Scale",
        "authors": "Chen Wu",
        "venue": "IRConf",
        "year": 2022,
        "abstract": "Dense retrieval uses learned vector representations for search.",
        "sections": [
            ("Introduction", "Dense retrieval encodes queries and passages into a shared vector space. Nearest neighbour search then finds relevant passages. This replaces sparse lexical matching."),
            ("Training", "Contrastive objectives separate relevant from irrelevant passages. Hard negatives sharpen the decision boundary. Batch size matters considerably."),
        ],
    },
    {
        "paper_id": "gnn-review",
        "title": "Graph Neural Networks: A Review",
        "authors": "Dana Ivanova; Emil Novak",
        "venue": "SurveyJ",
        "year": 2021,
        "abstract": "A review of message passing architectures on graphs.",
        "sections": [
            ("Overview", "Graph neural networks pass messages along edges. Node states aggregate neighbour information. Depth controls the receptive field."),
            ("Applications", "Applications include molecules, citation networks, and knowledge graphs. Scalability remains an open challenge for dense graphs."),
        ],
    },
    {
        "paper_id": "protein-fold",
        "title": "Protein Folding with Attention Models",
        "authors": "Farid Khan",
        "venue": "BioML",
        "year": 2023,
        "abstract": "Attention models predict protein structure from sequence.",
        "sections": [
            ("Introduction", "Protein structure prediction maps sequences to three dimensional coordinates. Attention models capture residue interactions. Accuracy now rivals experimental methods for many families."),
            ("Evaluation", "Benchmarks score the distance between predicted and solved structures. Confidence estimates correlate with accuracy."),
        ],
    },
    {
        "paper_id": "cite-ground",
        "title": "Citation Grounded Generation",
        "authors": "Grace Liu; Hana Sato",
        "venue": "NLPConf",
        "year": 2024,
        "abstract": "Grounding generated answers in citable evidence improves trust.",
        "sections": [
            ("Introduction", "Generated answers should cite the evidence they rely on. Reference numbers tie claims to retrieved passages. Readers can then verify each claim."),
            ("Findings", "Citation quality varies with retrieval quality. Models cite more reliably after fine tuning. Unsupported claims remain a failure mode."),
        ],
    },
]


def write_demo_corpus(directory) -> None:
    for paper in PAPERS:
        lines = [
            "---",
            f"title: {paper['title']}",
            f"authors: {paper['authors']}",
            f"venue: {paper['venue']}",
            f"year: {paper['year']}",
            f"abstract: {paper['abstract']}",
            f"paper_id: {paper['paper_id']}",
            "---",
            "",
        ]
        for heading, body in paper["sections"]:
            lines += [f"# {heading}", "", body, ""]
        (directory / f"{paper['paper_id']}.md").write_text("\n".join(lines), encoding="utf-8")


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    directory = tmp_path_factory.mktemp("corpus")
    write_demo_corpus(directory)
    return directory


MOCK_SCRIPT = {
    "rules": [
        {"contains": "sparse attention", "response": "Sparse attention reduces cost on long inputs [1]."},
        {"contains": "dense retrieval", "response": "Dense retrieval searches a vector space [1][2]."},
    ],
    "default": "The evidence does not cover this question.",
}


@pytest.fixture(scope="session")
def mock_script_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("llm") / "script.json"
    path.write_text(json.dumps(MOCK_SCRIPT), encoding="utf-8")
    return path


class _SparqlHandler(BaseHTTPRequestHandler):
    payload = {
        "head": {"vars": ["author", "hIndex"]},
        "results": {
            "bindings": [
                {
                    "author": {"type": "uri", "value": "https://semopenalex.org/author/A1"},
                    "hIndex": {
                        "type": "literal",
                        "datatype": "http://www.w3.org/2001/XMLSchema#integer",
                        "value": "42",
                    },
                }
            ]
        },
    }

    def do_POST(self):
        body = json.dumps(self.payload).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/sparql-results+json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture(scope="session")
def sparql_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _SparqlHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/sparql"
    server.shutdown()
