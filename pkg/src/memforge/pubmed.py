"""NCBI E-utilities client: esearch for ids, efetch for abstract text.

Optional: every pipeline accepts a local JSONL corpus instead. Requests
are rate-limited to NCBI's published ceilings (3/s anonymous, 10/s with
an API key taken from MEMFORGE_NCBI_API_KEY).
"""

from __future__ import annotations

import os
import time
import xml.etree.ElementTree as ET

import httpx

from .corpus import Document, join_title_abstract
from .errors import NetworkError

NCBI_API_KEY_ENV = "MEMFORGE_NCBI_API_KEY"
ESEARCH_URL = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils/esearch.fcgi"
EFETCH_URL = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils/efetch.fcgi"


class PubMedClient:
    """Minimal synchronous client for PubMed literature retrieval."""

    def __init__(self, max_results: int = 20, timeout: float = 30.0, transport=None):
        self.max_results = max_results
        self.api_key = os.environ.get(NCBI_API_KEY_ENV)
        self._min_interval = 0.11 if self.api_key else 0.34
        self._last_request = 0.0
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def _throttle(self) -> None:
        wait = self._min_interval - (time.monotonic() - self._last_request)
        if wait > 0:
            time.sleep(wait)
        self._last_request = time.monotonic()

    def _get(self, url: str, params: dict) -> httpx.Response:
        if self.api_key:
            params = {**params, "api_key": self.api_key}
        self._throttle()
        try:
            response = self._client.get(url, params=params)
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise NetworkError(f"E-utilities request failed: {exc}")
        return response

    def search(self, query: str) -> list[str]:
        response = self._get(
            ESEARCH_URL,
            {
                "db": "pubmed",
                "term": query,
                "retmode": "json",
                "retmax": self.max_results,
            },
        )
        try:
            return list(response.json()["esearchresult"]["idlist"])
        except (KeyError, ValueError) as exc:
            raise NetworkError(f"esearch response unparseable: {exc}")

    def fetch_abstracts(self, ids: list[str]) -> list[Document]:
        if not ids:
            return []
        response = self._get(
            EFETCH_URL,
            {
                "db": "pubmed",
                "id": ",".join(ids),
                "rettype": "abstract",
                "retmode": "xml",
            },
        )
        return parse_efetch_xml(response.text)

    def fetch_documents(self, query: str) -> list[Document]:
        return self.fetch_abstracts(self.search(query))


def parse_efetch_xml(payload: str) -> list[Document]:
    """Extract (pmid, title + abstract) pairs from efetch XML."""
    try:
        root = ET.fromstring(payload)
    except ET.ParseError as exc:
        raise NetworkError(f"efetch response unparseable: {exc}")
    docs: list[Document] = []
    for article in root.iter("PubmedArticle"):
        pmid = article.findtext(".//PMID") or ""
        title = article.findtext(".//ArticleTitle") or ""
        pieces = [
            "".join(node.itertext()).strip()
            for node in article.findall(".//Abstract/AbstractText")
        ]
        abstract = " ".join(p for p in pieces if p)
        if not pmid or not (title or abstract):
            continue
        docs.append(Document.from_raw(pmid, join_title_abstract(title, abstract)))
    return docs
