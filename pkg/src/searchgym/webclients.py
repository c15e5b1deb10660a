"""External search providers: Serper-backed text search and image (Lens) search.

Tests use in-memory stand-ins; the sandbox only relies on the two method
signatures, never on these concrete clients.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import httpx


class WebSearchError(Exception):
    pass


@dataclass(frozen=True)
class WebResult:
    title: str
    link: str
    snippet: str

    def to_json(self) -> dict:
        return {"title": self.title, "link": self.link, "snippet": self.snippet}

    @classmethod
    def from_json(cls, data: dict) -> "WebResult":
        return cls(
            title=str(data.get("title", "")),
            link=str(data.get("link", "")),
            snippet=str(data.get("snippet", "")),
        )


class WebSearchClient(Protocol):
    def search(self, query: str) -> list[WebResult]: ...


class ImageSearchClient(Protocol):
    def search_by_image(self, image_ref: str) -> list[tuple[str, str]]: ...


class SerperWebClient:
    """Text search via the Serper API (Google results as title/link/snippet)."""

    def __init__(
        self,
        api_key: str,
        endpoint: str = "https://google.serper.dev/search",
        timeout: float = 20.0,
    ):
        self.api_key = api_key
        self.endpoint = endpoint
        self.timeout = timeout

    def search(self, query: str) -> list[WebResult]:
        try:
            response = httpx.post(
                self.endpoint,
                json={"q": query},
                headers={"X-API-KEY": self.api_key},
                timeout=self.timeout,
            )
            response.raise_for_status()
            body = response.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise WebSearchError(f"web search failed: {exc}") from exc
        return [
            WebResult(
                title=str(item.get("title", "")),
                link=str(item.get("link", "")),
                snippet=str(item.get("snippet", "")),
            )
            for item in body.get("organic", [])
        ]


class SerperImageClient:
    """Image-to-image search via the Serper Lens endpoint."""

    def __init__(
        self,
        api_key: str,
        endpoint: str = "https://google.serper.dev/lens",
        timeout: float = 30.0,
    ):
        self.api_key = api_key
        self.endpoint = endpoint
        self.timeout = timeout

    def search_by_image(self, image_ref: str) -> list[tuple[str, str]]:
        try:
            response = httpx.post(
                self.endpoint,
                json={"url": image_ref},
                headers={"X-API-KEY": self.api_key},
                timeout=self.timeout,
            )
            response.raise_for_status()
            body = response.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise WebSearchError(f"image search failed: {exc}") from exc
        results = []
        for item in body.get("organic", []):
            results.append(
                (str(item.get("imageUrl", item.get("thumbnailUrl", ""))), str(item.get("title", "")))
            )
        return results
