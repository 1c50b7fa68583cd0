"""Layered run configuration: YAML document + CLI flag overrides (flags win)."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import yaml

from .errors import ConfigError
from .pipeline.runner import PipelineConfig


@dataclass
class LlmConfig:
    backend: str = "none"  # scripted | http | none
    scripted_file: Optional[str] = None
    endpoint: Optional[str] = None
    model: str = "default"
    key_env: Optional[str] = None
    temperature: float = 0.5
    max_tokens: int = 2048
    max_parallel: int = 4

    def validate(self) -> None:
        if self.backend not in ("scripted", "http", "none"):
            raise ConfigError(f"llm.backend must be scripted|http|none, got {self.backend!r}")
        if self.backend == "scripted" and not self.scripted_file:
            raise ConfigError("llm.backend=scripted requires llm.scripted_file")
        if self.backend == "scripted" and self.endpoint:
            raise ConfigError("scripted and live backends are mutually exclusive")

    def build(self):
        """Instantiate the configured client (None when backend is none)."""
        self.validate()
        if self.backend == "none":
            return None
        if self.backend == "scripted":
            from .llm import ScriptedLlm

            return ScriptedLlm.from_file(self.scripted_file)
        from .llm import HttpLlm
        import os

        return HttpLlm(
            endpoint=self.endpoint,
            model=self.model,
            api_key=os.environ.get(self.key_env) if self.key_env else None,
            temperature=self.temperature,
            max_tokens=self.max_tokens,
            max_parallel=self.max_parallel,
        )


@dataclass
class RunConfig:
    schema: Optional[str] = None
    files: List[str] = field(default_factory=list)
    ontology: Optional[str] = None
    lexicon: Optional[str] = None
    prompts_dir: Optional[str] = None
    output_dir: str = "out"
    llm: LlmConfig = field(default_factory=LlmConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    base_dir: Optional[Path] = None

    def resolve(self, path: Optional[str]) -> Optional[Path]:
        if path is None:
            return None
        p = Path(path)
        if p.is_absolute() or self.base_dir is None:
            return p
        return self.base_dir / p


def load_run_config(path: Optional[Path | str]) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    dataset = doc.get("dataset") or {}
    llm_doc = doc.get("llm") or {}
    pipe_doc = doc.get("pipeline") or {}
    try:
        pipeline = PipelineConfig(
            tool_budget=int(pipe_doc.get("budget", 8)),
            cache_size=int(pipe_doc.get("cache_size", 5)),
            top_values_k=int(pipe_doc.get("top_values_k", 10)),
            top_n=int(pipe_doc.get("top_n", 10)),
            ontology_window=int(pipe_doc.get("window_size", 200)),
            max_result_rows=int(pipe_doc.get("max_result_rows", 50)),
            templates_dir=doc.get("prompts_dir"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc))
    config = RunConfig(
        schema=dataset.get("schema"),
        files=list(dataset.get("files") or []),
        ontology=doc.get("ontology"),
        lexicon=doc.get("lexicon"),
        prompts_dir=doc.get("prompts_dir"),
        output_dir=doc.get("output_dir", "out"),
        llm=LlmConfig(
            backend=llm_doc.get("backend", "none"),
            scripted_file=llm_doc.get("scripted_file"),
            endpoint=llm_doc.get("endpoint"),
            model=llm_doc.get("model", "default"),
            key_env=llm_doc.get("key_env"),
            temperature=float(llm_doc.get("temperature", 0.5)),
            max_tokens=int(llm_doc.get("max_tokens", 2048)),
            max_parallel=int(llm_doc.get("max_parallel", 4)),
        ),
        pipeline=pipeline,
        base_dir=path.parent,
    )
    # resolve the paths that are relative to the config file
    config.schema = str(config.resolve(config.schema)) if config.schema else None
    config.files = [str(config.resolve(f)) for f in config.files]
    config.ontology = str(config.resolve(config.ontology)) if config.ontology else None
    config.lexicon = str(config.resolve(config.lexicon)) if config.lexicon else None
    if config.llm.scripted_file:
        config.llm.scripted_file = str(config.resolve(config.llm.scripted_file))
    if config.prompts_dir:
        config.prompts_dir = str(config.resolve(config.prompts_dir))
        config.pipeline.templates_dir = config.prompts_dir
    config.llm.validate()
    return config
