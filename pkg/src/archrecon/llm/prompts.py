"""Prompt texts and the sectioned layout shared by the agents and the offline mock.

User content is a sequence of `## <Section>` blocks. Each system prompt carries a
`[task:...]` tag naming the job."""
from __future__ import annotations
import re
from typing import Iterable, Sequence

from .gateway import LlmRequest


TASK_SUMMARIZE = 'summarize-file'
TASK_README = 'gen-readme'
TASK_DIAGRAM = 'gen-diagram'
TASK_ENTRIES = 'nominate-entries'

SUMMARY_DELIMITER = '@@SUMMARY@@'
NO_ENTRIES = 'NONE'
README_SECTIONS = ('Architecture', 'Key Modules', 'Primary Workflows', 'Entry Points')

SUMMARIZE_SECTIONS = ('File', 'Language', 'Symbols', 'References', 'Candidate Related Files',
                      'Content')
README_INPUT_SECTIONS = ('Repository', 'Entry Points', 'Traces', 'Summaries',
                         'Cross-Repository Context')
DIAGRAM_SECTIONS = ('Repository', 'README', 'Files', 'Summaries', 'Dependencies')
ENTRY_SECTIONS = ('Repository', 'Files', 'Summaries')

SYSTEM_PROMPTS = {
    TASK_SUMMARIZE: f"""[task:{TASK_SUMMARIZE}]
You document one source file of a larger repository. You receive the file, the symbols it
declares, its references to and from other files, and candidate related files.
First list the repository files that are functionally closely related to this file, one
path per line, chosen from the candidates or the references. Then write a line containing
only {SUMMARY_DELIMITER}. Then summarize the file's responsibility, its main symbols and how
it collaborates with the related files in at most {{summary_tokens}} tokens.""",
    TASK_README: f"""[task:{TASK_README}]
You write the README of a repository for engineers new to it. You receive the entry points,
the downstream call chains traced from them, per file summaries and possibly context about
other repositories that call this one. Write Markdown with exactly these level two sections:
{', '.join(README_SECTIONS)}. Describe the architecture, the key modules, the execution
flows starting at each entry point, and list every entry point.""",
    TASK_DIAGRAM: f"""[task:{TASK_DIAGRAM}]
You draw the architecture of part of a repository as a Mermaid flowchart. Begin with
`flowchart TD`. Use one `subgraph` per architectural layer, one node per module, `-->` for
calls, `-.->` for data flow and `==>` for dependencies. Use a nested subgraph inside a layer
to expand the internal workflow of a complex module. Answer with the diagram only.""",
    TASK_ENTRIES: f"""[task:{TASK_ENTRIES}]
You find where execution starts in a repository. From the file summaries, list the
repository files that are top level entry points, one path per line, or {NO_ENTRIES}.""",
}


def system_prompt(task: str, **values) -> str:
    return SYSTEM_PROMPTS[task].format(**values) if values else SYSTEM_PROMPTS[task]


def render_sections(sections: Iterable[tuple[str, str]]) -> str:
    """Join `(name, body)` pairs into `## name` blocks."""
    return ''.join(f'## {name}\n{body.rstrip()}\n\n' for name, body in sections).rstrip() + '\n'


def split_sections(text: str, names: Sequence[str]) -> dict[str, str]:
    """Inverse of `render_sections`. Headers are recognised only in the order of `names`, so
section bodies may contain lines that look like earlier headers."""
    order = {name: position for position, name in enumerate(names)}
    sections: dict[str, list[str]] = {}
    current: str | None = None
    for line in text.splitlines():
        name = line[3:].strip() if line.startswith('## ') else None
        if name in order and (current is None or order[name] > order[current]):
            current = name
            sections[current] = []
        elif current is not None:
            sections[current].append(line)
    return {name: '\n'.join(lines).strip('\n') for name, lines in sections.items()}


_BULLET = re.compile(r'^\s*(?:[-*+]|\d+[.)])\s+')


def clean_path_line(line: str) -> str:
    """A path as listed by a model: bullets, backticks and trailing remarks removed."""
    line = _BULLET.sub('', line).strip()
    if line.startswith('`') and '`' in line[1:]:
        return line[1:line.index('`', 1)]
    return line.split()[0].rstrip(':,;') if line else ''


def parse_summary_output(text: str) -> tuple[list[str], str, bool]:
    """Split a summarizer answer into related file lines and summary text.

:returns: tuple
    related paths as written, summary text, whether the delimiter was present"""
    before, found, after = text.partition(SUMMARY_DELIMITER)
    if not found:
        return [], text.strip(), False
    related = [clean_path_line(line) for line in before.splitlines() if line.strip()]
    return [path for path in related if path], after.strip(), True


def summarize_request(path: str, language: str, symbols: Sequence[str], references: str,
                      candidates: Sequence[str], content: str, summary_tokens: int,
                      max_output_tokens: int) -> LlmRequest:
    user = render_sections([
        ('File', path),
        ('Language', language),
        ('Symbols', '\n'.join(symbols)),
        ('References', references or '(none)'),
        ('Candidate Related Files', '\n'.join(candidates) or '(none)'),
        ('Content', content),
    ])
    return LlmRequest(system_prompt(TASK_SUMMARIZE, summary_tokens=summary_tokens), user,
                      max_output_tokens)


def readme_request(repo_name: str, entries: str, traces: str, summaries: str,
                   signals: str | None, max_output_tokens: int, repair: str | None = None
                   ) -> LlmRequest:
    sections = [('Repository', repo_name), ('Entry Points', entries or '(none)'),
                ('Traces', traces or '(none)'), ('Summaries', summaries)]
    if signals:
        sections.append(('Cross-Repository Context', signals))
    system = system_prompt(TASK_README)
    if repair:
        system += f'\nYour previous answer was rejected: {repair}. Answer again.'
    return LlmRequest(system, render_sections(sections), max_output_tokens)


def diagram_request(repo_name: str, readme: str, files: str, summaries: str,
                    dependencies: str, max_output_tokens: int, repair: str | None = None
                    ) -> LlmRequest:
    user = render_sections([('Repository', repo_name), ('README', readme), ('Files', files),
                            ('Summaries', summaries), ('Dependencies', dependencies or '(none)')])
    system = system_prompt(TASK_DIAGRAM)
    if repair:
        system += f'\nYour previous answer could not be parsed: {repair}. Answer again.'
    return LlmRequest(system, user, max_output_tokens)


def entries_request(repo_name: str, files: str, summaries: str,
                    max_output_tokens: int) -> LlmRequest:
    user = render_sections([('Repository', repo_name), ('Files', files),
                            ('Summaries', summaries)])
    return LlmRequest(system_prompt(TASK_ENTRIES), user, max_output_tokens)
