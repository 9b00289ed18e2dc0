import io
import tarfile

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddimine.corpus import (
    Abstract,
    CorpusStats,
    DrugLexicon,
    TokenizedAbstract,
    corpus_stats,
    filter_cardiac,
    load_corpus,
    match_drugs,
    parse_abstracts,
    render_stats,
    tokenize,
    tokenize_abstracts,
)
from ddimine.errors import CorpusParseError, ValidationError
from helpers import match_oracle

FIG1_SENTENCE = "Bumetanide and furosemide in heart failure."

_LEXICON = DrugLexicon(
    {
        "furosemide": [("furosemide",)],
        "bumetanide": [("bumetanide",)],
        "digoxin": [("digoxin",)],
        "aspirin": [("aspirin",), ("acetyl", "salicylic", "acid")],
    },
    cardiac={"furosemide", "bumetanide"},
)


@pytest.fixture
def small_lexicon():
    return _LEXICON


class TestTokenize:
    def test_empty(self):
        assert tokenize("") == []

    def test_opening_sentence(self):
        assert tokenize(FIG1_SENTENCE) == ["bumetanide", "and", "furosemide", "in", "heart", "failure"]

    def test_quotes_and_edge_hyphen(self):
        # hand-worked: curly quotes separate; the hyphen after the closing
        # quote has no run to its left, so it does not join
        assert tokenize("“Dose”-response curves") == ["dose", "response", "curves"]

    def test_internal_hyphen_kept(self):
        assert tokenize("state-of-the-art dose--response") == ["state-of-the-art", "dose", "response"]

    def test_digits(self):
        assert tokenize("40 mg and 2.0 mg") == ["40", "mg", "and", "2", "0", "mg"]

    def test_deterministic(self):
        text = "Bumetanide (1.0 and 2.0 mg) -- “Dose”-response!"
        assert tokenize(text) == tokenize(text)

    @given(st.text(max_size=200))
    @settings(max_examples=200)
    def test_tokens_are_fixed_points(self, text):
        # every emitted token satisfies the tokenizer's own character rule
        for tok in tokenize(text):
            assert tok
            assert tok == tok.lower()
            assert tokenize(tok) == [tok]


class TestParseLines:
    def test_empty_stream(self):
        abstracts, skipped = parse_abstracts(io.BytesIO(b""), "lines")
        assert abstracts == [] and skipped == 0

    def test_single_record(self):
        data = f"X1\t{FIG1_SENTENCE} We assessed the handling of oral bumetanide.".encode()
        abstracts, skipped = parse_abstracts(io.BytesIO(data), "lines")
        assert skipped == 0
        assert abstracts[0].id == "X1"
        assert abstracts[0].text.startswith("Bumetanide and furosemide")

    def test_record_without_body_skipped(self):
        data = b"A\tfirst text\nB\t\nC\tthird text\n"
        abstracts, skipped = parse_abstracts(io.BytesIO(data), "lines")
        assert [a.id for a in abstracts] == ["A", "C"]
        assert skipped == 1

    def test_duplicate_id_rejected(self):
        data = b"A\tone\nA\ttwo\n"
        with pytest.raises(ValidationError, match="duplicate"):
            parse_abstracts(io.BytesIO(data), "lines")

    def test_unknown_format(self):
        with pytest.raises(ValidationError, match="format"):
            parse_abstracts(io.BytesIO(b""), "csv")


PUBMED_DOC = b"""<?xml version="1.0"?>
<PubmedArticleSet>
  <PubmedArticle>
    <MedlineCitation>
      <PMID>101</PMID>
      <Article>
        <ArticleTitle>Bumetanide and furosemide in heart failure.</ArticleTitle>
        <Abstract><AbstractText>We assessed oral bumetanide and furosemide.</AbstractText></Abstract>
      </Article>
    </MedlineCitation>
  </PubmedArticle>
  <PubmedArticle>
    <MedlineCitation>
      <PMID>102</PMID>
      <Article><ArticleTitle>No abstract here.</ArticleTitle></Article>
    </MedlineCitation>
  </PubmedArticle>
  <PubmedArticle>
    <MedlineCitation>
      <PMID>103</PMID>
      <Article>
        <Abstract>
          <AbstractText Label="BACKGROUND">Part one.</AbstractText>
          <AbstractText Label="RESULTS">Part two.</AbstractText>
        </Abstract>
      </Article>
    </MedlineCitation>
  </PubmedArticle>
</PubmedArticleSet>
"""


class TestParsePubmedXml:
    def test_records_and_skip(self):
        abstracts, skipped = parse_abstracts(io.BytesIO(PUBMED_DOC), "pubmed-xml")
        assert [a.id for a in abstracts] == ["101", "103"]
        assert skipped == 1
        assert abstracts[0].text == (
            "Bumetanide and furosemide in heart failure. We assessed oral bumetanide and furosemide."
        )
        assert abstracts[1].text == "Part one. Part two."

    def test_invalid_xml_names_byte_offset(self):
        with pytest.raises(CorpusParseError, match="byte offset") as err:
            parse_abstracts(io.BytesIO(b"<a><b></a>"), "pubmed-xml")
        assert err.value.byte_offset is not None

    def test_duplicate_pmid_rejected(self):
        doc = PUBMED_DOC.replace(b"<PMID>103</PMID>", b"<PMID>101</PMID>")
        with pytest.raises(ValidationError, match="duplicate"):
            parse_abstracts(io.BytesIO(doc), "pubmed-xml")


class TestLoadCorpus:
    def test_directory(self, tmp_path):
        (tmp_path / "b.tsv").write_text("B1\tbeta text\n")
        (tmp_path / "a.tsv").write_text("A1\talpha text\n")
        abstracts, _ = load_corpus(tmp_path, "lines")
        assert [a.id for a in abstracts] == ["A1", "B1"]  # sorted file order

    def test_tar_archive(self, tmp_path):
        archive = tmp_path / "corpus.tar"
        with tarfile.open(archive, "w") as tar:
            for name, payload in [("x.xml", PUBMED_DOC)]:
                info = tarfile.TarInfo(name)
                info.size = len(payload)
                tar.addfile(info, io.BytesIO(payload))
        abstracts, skipped = load_corpus(archive, "pubmed-xml")
        assert [a.id for a in abstracts] == ["101", "103"]
        assert skipped == 1

    def test_duplicate_across_files(self, tmp_path):
        (tmp_path / "a.tsv").write_text("A1\tone\n")
        (tmp_path / "b.tsv").write_text("A1\ttwo\n")
        with pytest.raises(ValidationError, match="duplicate"):
            load_corpus(tmp_path, "lines")


class TestMatchDrugs:
    def test_fig1_mentions(self, small_lexicon):
        tokens = tokenize(FIG1_SENTENCE)
        assert match_drugs(tokens, small_lexicon) == {"furosemide", "bumetanide"}

    def test_empty_tokens(self, small_lexicon):
        assert match_drugs([], small_lexicon) == set()

    def test_multi_token_phrase(self, small_lexicon):
        tokens = ["took", "acetyl", "salicylic", "acid", "daily"]
        assert match_oracle(tokens, small_lexicon) == {"aspirin"}
        assert match_drugs(tokens, small_lexicon) == {"aspirin"}

    def test_partial_phrase_no_match(self, small_lexicon):
        assert match_drugs(["acetyl", "salicylic"], small_lexicon) == set()

    @given(
        tokens=st.lists(
            st.sampled_from(
                ["acetyl", "salicylic", "acid", "furosemide", "bumetanide", "and", "mg", "x"]
            ),
            max_size=200,
        )
    )
    @settings(max_examples=150, deadline=None)
    def test_matches_brute_force_scan(self, tokens):
        assert match_drugs(tokens, _LEXICON) == match_oracle(tokens, _LEXICON)


class TestFilterCardiac:
    def _toka(self, aid, mentions):
        return TokenizedAbstract(aid, ("x",), frozenset(mentions))

    def test_mentioning_retained_and_empty_dropped(self, small_lexicon):
        keep = self._toka("K", {"furosemide"})
        drop = self._toka("D", set())
        assert filter_cardiac([keep, drop], small_lexicon) == [keep]

    def test_subset_and_idempotent(self, small_lexicon):
        abstracts = [self._toka(f"A{i}", {"digoxin"} if i % 2 else set()) for i in range(10)]
        once = filter_cardiac(abstracts, small_lexicon)
        assert set(a.id for a in once) <= set(a.id for a in abstracts)
        assert filter_cardiac(once, small_lexicon) == once


class TestCorpusStats:
    def test_empty(self):
        assert corpus_stats([]) == CorpusStats(0, 0.0, 0, 0.0, 0.0, 0)

    def test_hand_example(self):
        # multisets {a,a,b} and {b,c}: 5 tokens, 3 distinct overall,
        # 4 per-abstract distinct -> avg count per word 5/4
        abstracts = [
            TokenizedAbstract("1", ("a", "a", "b"), frozenset()),
            TokenizedAbstract("2", ("b", "c"), frozenset({"d1"})),
        ]
        stats = corpus_stats(abstracts)
        assert stats.avg_words_per_abstract == 2.5
        assert stats.n_distinct_words == 3
        assert stats.avg_count_per_word == 5 / 4
        assert stats.avg_drugs_per_abstract == 0.5
        assert stats.max_drugs_per_abstract == 1

    def test_render_mentions_reference_figures(self):
        text = render_stats(corpus_stats([]))
        assert "n_abstracts\t0" in text
        assert "# avg_words_per_abstract\t149.5" in text  # documented, not asserted


class TestLexicon:
    def test_load(self, tmp_path):
        path = tmp_path / "lexicon.tsv"
        path.write_text(
            "# comment\n"
            "furosemide\tFurosemide\t1\n"
            "furosemide\tLasix\t1\n"
            "aspirin\tacetyl salicylic acid\t0\n"
        )
        lex = DrugLexicon.load(path)
        assert lex.cardiac == {"furosemide"}
        assert ("acetyl", "salicylic", "acid") in lex.phrases_for("aspirin")
        assert len(lex.phrases_for("furosemide")) == 2

    def test_conflicting_flag_rejected(self, tmp_path):
        path = tmp_path / "lexicon.tsv"
        path.write_text("a\ta\t1\na\talpha\t0\n")
        with pytest.raises(ValidationError, match="conflicting"):
            DrugLexicon.load(path)

    def test_bad_flag_rejected(self, tmp_path):
        path = tmp_path / "lexicon.tsv"
        path.write_text("a\ta\tmaybe\n")
        with pytest.raises(ValidationError, match="flag"):
            DrugLexicon.load(path)

    def test_drug_id_with_whitespace_rejected(self):
        with pytest.raises(ValidationError):
            DrugLexicon({"bad id": [("bad",)]}, set())


def test_tokenize_abstracts_deterministic(small_lexicon):
    abstracts = [Abstract("X1", FIG1_SENTENCE), Abstract("X2", "Digoxin toxicity case.")]
    first = tokenize_abstracts(abstracts, small_lexicon)
    second = tokenize_abstracts(abstracts, small_lexicon)
    assert first == second
    assert first[0].drug_mentions == {"furosemide", "bumetanide"}
    assert first[1].drug_mentions == {"digoxin"}
