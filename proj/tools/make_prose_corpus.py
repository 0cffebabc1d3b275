#!/usr/bin/env python3
"""Build a plain-text English corpus from the docstrings of installed Python packages.

One paragraph per line. Files are visited in sorted order, so the same
installation always produces the same bytes.
"""

import argparse
import ast
import site
import sys
import sysconfig
from pathlib import Path


def docstrings(tree):
    nodes = [tree] + [
        n for n in ast.walk(tree) if isinstance(n, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef))
    ]
    for node in nodes:
        doc = ast.get_docstring(node, clean=True)
        if doc:
            yield doc


def paragraphs(doc, min_words):
    for block in doc.split("\n\n"):
        words = block.split()
        if len(words) >= min_words:
            yield " ".join(words)


def default_roots():
    roots = list(site.getsitepackages()) + [sysconfig.get_paths()["stdlib"]]
    return [Path(r) for r in dict.fromkeys(roots) if Path(r).is_dir()]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True, type=Path)
    ap.add_argument("--max-bytes", type=int, default=60_000_000)
    ap.add_argument("--min-words", type=int, default=6)
    ap.add_argument("roots", nargs="*", type=Path, help="directories to scan (default: site-packages and stdlib)")
    args = ap.parse_args()

    seen = set()
    written = 0
    with args.out.open("w", encoding="utf-8") as out:
        for root in args.roots or default_roots():
            for path in sorted(root.rglob("*.py")):
                try:
                    tree = ast.parse(path.read_text(encoding="utf-8"))
                except (SyntaxError, UnicodeDecodeError, ValueError, OSError):
                    continue
                for doc in docstrings(tree):
                    for para in paragraphs(doc, args.min_words):
                        if para in seen:
                            continue
                        seen.add(para)
                        line = para + "\n"
                        size = len(line.encode("utf-8"))
                        if written + size > args.max_bytes:
                            print(f"{written} bytes", file=sys.stderr)
                            return
                        out.write(line)
                        written += size
    print(f"{written} bytes", file=sys.stderr)


if __name__ == "__main__":
    main()
