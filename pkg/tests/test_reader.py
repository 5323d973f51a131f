import gzip
import io

import pytest

from kmerhist.errors import ParseError
from kmerhist.reader import SequenceRecord, parse_records, read_sequences


def recs(data: bytes, **kw):
    return list(parse_records(io.BufferedReader(io.BytesIO(data)), **kw))


def test_minimal_fastq():
    (r,) = recs(b"@r1\nACGT\n+\nIIII\n")
    assert r.id == "r1" and r.bases == b"ACGT" and r.quality == b"IIII"


def test_multiline_fasta():
    (r,) = recs(b">s\nAC\nGT\n")
    assert r.bases == b"ACGT" and r.quality is None


def test_fasta_several_records_and_crlf():
    out = recs(b">a desc\r\nAC\r\nG\r\n>b\r\n\r\nTT\r\n")
    assert [(r.id, r.bases) for r in out] == [("a", b"ACG"), ("b", b"TT")]


def test_quality_length_mismatch_reports_offset():
    data = b"@ok\nAC\n+\nII\n@bad\nACGT\n+\nIII\n"
    with pytest.raises(ParseError) as exc:
        recs(data)
    assert exc.value.offset == len(b"@ok\nAC\n+\nII\n")
    assert "byte 12" in str(exc.value)


def test_empty_id():
    with pytest.raises(ParseError):
        recs(b"@\nACGT\n+\nIIII\n")
    with pytest.raises(ParseError):
        recs(b">\nACGT\n")


def test_truncated_fastq():
    with pytest.raises(ParseError):
        recs(b"@r\nACGT\n")


def test_missing_plus():
    with pytest.raises(ParseError):
        recs(b"@r\nACGT\nIIII\nIIII\n")


def test_unknown_first_byte():
    with pytest.raises(ParseError):
        recs(b"ACGT\n")


def test_empty_input():
    assert recs(b"") == []


def test_gzip_sniffing(tmp_path):
    path = tmp_path / "r.fq.gz"
    path.write_bytes(gzip.compress(b"@r1\nACGT\n+\nIIII\n@r2\nGG\n+\nII\n"))
    assert read_sequences(path) == [b"ACGT", b"GG"]
    plain = tmp_path / "r.fa"
    plain.write_bytes(b">x\nACGT\n")
    assert read_sequences(plain) == [b"ACGT"]


def test_forced_format():
    (r,) = recs(b">s\nAC\n", format="fasta")
    assert r.bases == b"AC"


def test_parse_error_names_file(tmp_path):
    path = tmp_path / "bad.fq"
    path.write_bytes(b"@r\nACGT\n+\nII\n")
    with pytest.raises(ParseError, match="bad.fq"):
        read_sequences(path)


def test_record_invariant():
    with pytest.raises(ValueError):
        SequenceRecord("x", b"ACGT", b"II")
