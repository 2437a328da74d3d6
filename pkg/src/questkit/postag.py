"""Lightweight Penn-style POS tagger: closed-class lexicon, suffix
heuristics, NN fallback.  Deliberately tiny; plug in a real tagger via the
``tagger`` argument of features.pos_tag when accuracy matters.
"""

from __future__ import annotations

# Full Penn Treebank inventory (plus punctuation classes) so pre-tagged
# corpora and external taggers validate against it.
POS_TAGS = (
    ".", ",", ":",
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD",
    "NN", "NNS", "NNP", "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR",
    "RBS", "RP", "SYM", "TO", "UH", "VB", "VBD", "VBG", "VBN", "VBP",
    "VBZ", "WDT", "WP", "WP$", "WRB",
)

_LEXICON = {
    # wh-words
    "what": "WP", "who": "WP", "whom": "WP", "whose": "WP$",
    "which": "WDT", "where": "WRB", "when": "WRB", "why": "WRB",
    "how": "WRB",
    # pronouns
    "i": "PRP", "you": "PRP", "he": "PRP", "she": "PRP", "it": "PRP",
    "we": "PRP", "they": "PRP", "me": "PRP", "him": "PRP", "her": "PRP",
    "us": "PRP", "them": "PRP", "i'm": "PRP", "i'd": "PRP", "i've": "PRP",
    "my": "PRP$", "your": "PRP$", "his": "PRP$", "its": "PRP$",
    "our": "PRP$", "their": "PRP$",
    # determiners
    "the": "DT", "a": "DT", "an": "DT", "this": "DT", "that": "DT",
    "these": "DT", "those": "DT", "each": "DT", "every": "DT", "any": "DT",
    "some": "DT", "no": "DT", "all": "DT", "both": "DT",
    # modals and auxiliaries
    "can": "MD", "could": "MD", "will": "MD", "would": "MD",
    "shall": "MD", "should": "MD", "may": "MD", "might": "MD",
    "must": "MD",
    "is": "VBZ", "are": "VBP", "was": "VBD", "were": "VBD", "am": "VBP",
    "be": "VB", "been": "VBN", "being": "VBG",
    "do": "VBP", "does": "VBZ", "did": "VBD", "done": "VBN",
    "has": "VBZ", "have": "VBP", "had": "VBD", "having": "VBG",
    # prepositions / conjunctions / particles
    "of": "IN", "in": "IN", "on": "IN", "at": "IN", "for": "IN",
    "with": "IN", "from": "IN", "by": "IN", "about": "IN", "into": "IN",
    "after": "IN", "before": "IN", "under": "IN", "over": "IN",
    "during": "IN", "between": "IN", "as": "IN", "if": "IN",
    "because": "IN", "since": "IN", "unless": "IN", "until": "IN",
    "to": "TO",
    "and": "CC", "or": "CC", "but": "CC", "so": "CC", "nor": "CC",
    # adverbs and interjections
    "not": "RB", "n't": "RB", "also": "RB", "very": "RB", "too": "RB",
    "just": "RB", "still": "RB", "again": "RB", "here": "RB",
    "there": "EX", "now": "RB", "then": "RB", "already": "RB",
    "maybe": "RB", "never": "RB", "always": "RB", "once": "RB",
    "yes": "UH", "yeah": "UH", "please": "UH", "thanks": "NNS",
    "ok": "UH", "okay": "UH",
}

# Checked in order; stems shorter than 3 characters fall through.
_SUFFIX_RULES = (
    ("ing", "VBG"),
    ("ed", "VBD"),
    ("ly", "RB"),
    ("ous", "JJ"),
    ("ful", "JJ"),
    ("ive", "JJ"),
    ("ble", "JJ"),
    ("ical", "JJ"),
    ("s", "NNS"),
)


def _suffix_tag(lower: str) -> str | None:
    for suffix, tag in _SUFFIX_RULES:
        if lower.endswith(suffix) and len(lower) - len(suffix) >= 3:
            if suffix == "s" and lower.endswith("ss"):
                continue
            return tag
    return None


def default_tagger(tokens: list[str]) -> list[str]:
    """Tag tokens with the heuristic lexicon; unknown words fall to NN."""
    tags = []
    for tok in tokens:
        lower = tok.lower()
        if not any(ch.isalnum() for ch in tok):
            tags.append(".")
        elif lower in _LEXICON:
            tags.append(_LEXICON[lower])
        elif any(ch.isdigit() for ch in tok):
            tags.append("CD")
        elif tok[0].isupper():
            tags.append("NNP")
        elif (tag := _suffix_tag(lower)) is not None:
            tags.append(tag)
        else:
            tags.append("NN")
    return tags
