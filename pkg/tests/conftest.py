from __future__ import annotations

import numpy as np
import pytest

from stallkit.analyzer import SourceFile
from stallkit.repo_index import RepoSnapshot, build_index

UTIL_S = """package util;

class S {
  int n;
  str trim(str x) {
    return x.trim();
  }
}
"""

NET_CLIENT = """package net;

class Client {
  str host;
  int send(str body) {
    return body.len();
  }
}
"""

APP_MAIN = """package app;

import util.S;
import net.Client;

class Main {
  int b;
  void run(int a) {
    str s = "x";
    S helper = S();
    Client c = Client();
    int k = c.send(s);
  }
}
"""


@pytest.fixture
def small_repo() -> RepoSnapshot:
    return RepoSnapshot(
        "mem://small",
        (
            SourceFile("util/S.sub", UTIL_S),
            SourceFile("net/Client.sub", NET_CLIENT),
            SourceFile("app/Main.sub", APP_MAIN),
        ),
        "small",
    )


@pytest.fixture
def small_index(small_repo):
    return build_index(small_repo)


class TableBackend:
    """Tiny backend over a fixed token list; logits come from a callable
    ``fn(ids) -> list[float]`` so tests can script any distribution."""

    def __init__(self, tokens, fn, newline="\n"):
        self.tokens = list(tokens)
        self.fn = fn
        self.newline_id = self.tokens.index(newline)
        self.ids = {t: i for i, t in enumerate(self.tokens)}

    @property
    def vocab_size(self):
        return len(self.tokens)

    def encode(self, text):
        # greedy longest match over the token list
        out, i = [], 0
        by_len = sorted(self.tokens, key=len, reverse=True)
        while i < len(text):
            for t in by_len:
                if t and text.startswith(t, i):
                    out.append(self.ids[t])
                    i += len(t)
                    break
            else:
                raise ValueError(f"cannot encode {text[i]!r}")
        return out

    def decode(self, ids):
        return "".join(self.tokens[i] for i in ids)

    def token_text(self, tid):
        return self.tokens[tid]

    def next_logits(self, ids):
        return np.asarray(self.fn(list(ids)), dtype=float)
