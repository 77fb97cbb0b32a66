from __future__ import annotations

import pytest

from culturebench.core import QAPair
from culturebench.gateway import ChatRequest, GatewayConfig, LlmGateway, scripted_transport


def make_pair(
    language: str = "ja",
    primary: str = "RSE",
    secondary: str = "Games",
    tertiary: str = "Traditional Games",
    keyword: str = "hanafuda",
    question: str = "質問",
    answer: str = "回答",
    setting: str = "unique",
    status: str = "validated",
) -> QAPair:
    return QAPair.build(
        language=language,
        topic_path=(primary, secondary, tertiary),
        keyword=keyword,
        question=question,
        answer=answer,
        setting=setting,
        provenance=("Title", "https://example.org/page", 1),
        status=status,
    )


def live_gateway(script, **config_kwargs) -> LlmGateway:
    """Gateway in live mode backed by a scripted text function; no cache, no sleeping."""
    config = GatewayConfig(mode="live", requests_per_minute={"default": 100000}, **config_kwargs)
    return LlmGateway(config, transport=scripted_transport(script), sleep=lambda s: None)


@pytest.fixture
def echo_gateway() -> LlmGateway:
    return live_gateway(lambda req: req.messages[-1]["content"])


@pytest.fixture(autouse=True)
def _reset_prompt_dir():
    yield
    from culturebench.prompts import set_default_prompt_dir

    set_default_prompt_dir(None)


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    outcome = "PASS" if report.passed else "FAIL"
    print(f"\nACCEPTANCE {outcome}: {name}")


__all__ = ["make_pair", "live_gateway", "ChatRequest"]
