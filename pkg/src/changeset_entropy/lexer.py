"""C++ scanner producing sentence-framed token streams for n-gram modeling.

Each physical source line that yields at least one token becomes one
sentence, wrapped in ``<s>`` ... ``</s>``.  Comments, blank lines and
backslashes outside literals produce no tokens.  Such a backslash can only
be a line splice in valid C++, and keeping stray ones would make the
lexer's output depend on where a rejoined line happens to end.
"""

from __future__ import annotations

import enum
import posixpath
import re
import urllib.parse
from dataclasses import dataclass, field
from typing import Iterable, Sequence

BOS = "<s>"
EOS = "</s>"

DEFAULT_CPP_EXTENSIONS = (".cpp", ".cc", ".cxx", ".c", ".h", ".hpp", ".hxx")

# C++03 keyword table, plus the alternative operator spellings.
CPP_KEYWORDS = frozenset(
    """
    asm auto bool break case catch char class const const_cast continue
    default delete do double dynamic_cast else enum explicit export extern
    false float for friend goto if inline int long mutable namespace new
    operator private protected public register reinterpret_cast return short
    signed sizeof static static_cast struct switch template this throw true
    try typedef typeid typename union unsigned using virtual void volatile
    wchar_t while
    and and_eq bitand bitor compl not not_eq or or_eq xor xor_eq
    """.split()
)

PUNCTUATION = frozenset("{ } [ ] ( ) ; , : # ##".split())

# Longest first so the alternation implements maximal munch.
OPERATORS = sorted(
    """
    >>= <<= ->* ... ## :: -> ++ -- << >> <= >= == != && || += -= *= /= %= &=
    |= ^= .* { } [ ] ( ) ; , : # + - * / % & | ^ ~ ! = < > ? .
    """.split(),
    key=len,
    reverse=True,
)


class TokenKind(enum.Enum):
    IDENTIFIER = "identifier"
    KEYWORD = "keyword"
    NUMBER = "numeric-literal"
    STRING = "string-literal"
    CHAR = "char-literal"
    OPERATOR = "operator"
    PUNCTUATION = "punctuation"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class Token:
    text: str
    kind: TokenKind

    def __post_init__(self) -> None:
        if self.kind is TokenKind.BOUNDARY:
            if self.text not in (BOS, EOS):
                raise ValueError(f"boundary token must be {BOS} or {EOS}, got {self.text!r}")
        elif not self.text:
            raise ValueError("non-boundary token must have non-empty text")


BOS_TOKEN = Token(BOS, TokenKind.BOUNDARY)
EOS_TOKEN = Token(EOS, TokenKind.BOUNDARY)


@dataclass
class TokenStream:
    """Ordered tokens plus the identifier of what was lexed."""

    tokens: list[Token] = field(default_factory=list)
    source_id: str = ""

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    @property
    def texts(self) -> list[str]:
        return [t.text for t in self.tokens]

    def sentences(self) -> list[list[str]]:
        """Split into per-sentence lexeme lists, boundary markers removed.

        Tokens outside any ``<s>``/``</s>`` frame form their own sentence.
        """
        out: list[list[str]] = []
        current: list[str] | None = None
        for tok in self.tokens:
            if tok.text == BOS and tok.kind is TokenKind.BOUNDARY:
                if current:
                    out.append(current)
                current = []
            elif tok.text == EOS and tok.kind is TokenKind.BOUNDARY:
                if current:
                    out.append(current)
                current = None
            else:
                if current is None:
                    current = []
                current.append(tok.text)
        if current:
            out.append(current)
        return out

    def to_corpus_text(self) -> str:
        """Render as LM-toolkit corpus text: one sentence per line, no markers."""
        return "".join(" ".join(map(encode_lexeme, s)) + "\n" for s in self.sentences())

    @classmethod
    def from_corpus_text(cls, text: str, source_id: str = "") -> "TokenStream":
        return cls.from_sentences((map(decode_lexeme, line.split()) for line in text.splitlines()), source_id)

    @classmethod
    def concat(cls, streams: Iterable["TokenStream"], source_id: str = "") -> "TokenStream":
        tokens: list[Token] = []
        for s in streams:
            tokens.extend(s.tokens)
        return cls(tokens, source_id)

    @classmethod
    def from_sentences(cls, sentences: Iterable[Sequence[str]], source_id: str = "") -> "TokenStream":
        """Frame pre-split sentences; lexemes are re-classified by the scanner rules."""
        tokens: list[Token] = []
        for sent in sentences:
            sent = [w for w in sent if w]
            if not sent:
                continue
            tokens.append(BOS_TOKEN)
            tokens.extend(Token(w, classify(w)) for w in sent)
            tokens.append(EOS_TOKEN)
        return cls(tokens, source_id)


_TOKEN_RE = re.compile(
    r"""
    (?P<newline>\r\n|\r|\n)
  | (?P<splice>\\)
  | (?P<space>[^\S\r\n]+)
  | (?P<line_comment>//[^\r\n]*)
  | (?P<block_comment>/\*.*?(?:\*/|\Z))
  | (?P<string>L?"(?:[^"\\\r\n]|\\[^\r\n])*(?:"|\\?(?=\r\n|\r|\n|\Z)))
  | (?P<char>L?'(?:[^'\\\r\n]|\\[^\r\n])*(?:'|\\?(?=\r\n|\r|\n|\Z)))
  | (?P<number>\.?[0-9](?:[eEpP][+-]|[A-Za-z0-9_.])*)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>"""
    + "|".join(re.escape(op) for op in OPERATORS)
    + r""")
  | (?P<other>.)
    """,
    re.VERBOSE | re.DOTALL,
)


def classify(lexeme: str) -> TokenKind:
    """Kind of a single lexeme, using the same rules as the scanner."""
    if lexeme in (BOS, EOS):
        return TokenKind.BOUNDARY
    m = _TOKEN_RE.match(lexeme)
    if m is None or m.end() != len(lexeme):
        return TokenKind.PUNCTUATION
    return _kind_of(m.lastgroup, lexeme) or TokenKind.PUNCTUATION


def _kind_of(group: str | None, text: str) -> TokenKind | None:
    if group == "word":
        return TokenKind.KEYWORD if text in CPP_KEYWORDS else TokenKind.IDENTIFIER
    if group == "number":
        return TokenKind.NUMBER
    if group == "string":
        return TokenKind.STRING
    if group == "char":
        return TokenKind.CHAR
    if group == "op":
        return TokenKind.PUNCTUATION if text in PUNCTUATION else TokenKind.OPERATOR
    if group == "other":
        return TokenKind.PUNCTUATION
    return None


_LITERAL_PREFIXES = ('"', "'", 'L"', "L'")
_ESCAPE_RE = re.compile(r"[%\s]")


def encode_lexeme(lexeme: str) -> str:
    """Make a lexeme safe for whitespace-delimited files.

    Only string and char literals can contain whitespace; in those, ``%``
    and whitespace are percent-encoded.  Every other lexeme is unchanged.
    """
    if not lexeme.startswith(_LITERAL_PREFIXES):
        return lexeme
    return _ESCAPE_RE.sub(lambda m: "".join(f"%{b:02X}" for b in m.group().encode("utf-8")), lexeme)


def decode_lexeme(word: str) -> str:
    if not word.startswith(_LITERAL_PREFIXES) or "%" not in word:
        return word
    return urllib.parse.unquote(word, errors="replace")


def _decode(text: str | bytes) -> str:
    if isinstance(text, bytes):
        return text.decode("utf-8", errors="replace")
    return text


def lex_lines(text: str | bytes) -> list[list[Token]]:
    """Lex ``text`` and group tokens by the physical line they start on.

    Lines without tokens are omitted.  The scanner never fails: anything
    unrecognised becomes a one-character punctuation token.
    """
    text = _decode(text)
    lines: list[list[Token]] = []
    current: list[Token] = []
    for m in _TOKEN_RE.finditer(text):
        group = m.lastgroup
        if group == "newline":
            if current:
                lines.append(current)
                current = []
            continue
        lexeme = m.group()
        if group == "block_comment":
            # a multi-line comment still ends the lines it spans
            if current and ("\n" in lexeme or "\r" in lexeme):
                lines.append(current)
                current = []
            continue
        kind = _kind_of(group, lexeme)
        if kind is not None:
            current.append(Token(lexeme, kind))
    if current:
        lines.append(current)
    return lines


def _frame(lines: Iterable[list[Token]]) -> list[Token]:
    out: list[Token] = []
    for line in lines:
        out.append(BOS_TOKEN)
        out.extend(line)
        out.append(EOS_TOKEN)
    return out


def tokenize_source(text: str | bytes, source_id: str = "") -> TokenStream:
    """Tokenize a whole C++ source text, one sentence per physical line."""
    return TokenStream(_frame(lex_lines(text)), source_id)


def tokenize_lines(lines: Iterable[str | bytes], source_id: str = "") -> TokenStream:
    """Tokenize diff lines (prefix already removed); each line is lexed alone."""
    out: list[Token] = []
    for line in lines:
        toks = [t for ln in lex_lines(line) for t in ln]
        if toks:
            out.append(BOS_TOKEN)
            out.extend(toks)
            out.append(EOS_TOKEN)
    return TokenStream(out, source_id)


def is_cpp_path(path: str, extensions: Sequence[str] = DEFAULT_CPP_EXTENSIONS) -> bool:
    ext = posixpath.splitext(path.replace("\\", "/"))[1].lower()
    return bool(ext) and ext in {e.lower() for e in extensions}


def cpp_filter(extensions: Sequence[str] | None = None):
    """Return a path predicate for the given extension set."""
    exts = tuple(extensions) if extensions else DEFAULT_CPP_EXTENSIONS
    return lambda path: is_cpp_path(path, exts)
