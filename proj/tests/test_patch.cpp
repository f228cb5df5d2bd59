#include "kagent/patch.hpp"
#include "kagent/text.hpp"

#include "support/patch_oracle.hpp"

#include <doctest.h>

#include <random>

using namespace kagent;
using kagent::testing::oracle_apply;

namespace {

Patch bound(std::vector<PatchEdit> edits, std::string_view source)
{
    Patch p;
    p.edits = std::move(edits);
    return bind_patch(std::move(p), "v001-test", source);
}

} // namespace

TEST_CASE("parse_patch reads all three edit kinds and sorts them")
{
    auto p = parse_patch("Here is the fix.\n"
                         "INSERT 7\n"
                         "    __syncthreads();\n"
                         "END_EDIT\n"
                         "REPLACE 2 3\n"
                         "int a = 1;\n"
                         "END_EDIT\n"
                         "some narration\n"
                         "DELETE 5 5\n"
                         "END_EDIT\n");
    REQUIRE(p.edits.size() == 3);
    CHECK(p.edits[0] == PatchEdit::replace(2, 3, {"int a = 1;"}));
    CHECK(p.edits[1] == PatchEdit::remove(5, 5));
    CHECK(p.edits[2] == PatchEdit::insert(7, {"    __syncthreads();"}));
    CHECK(p.base_fingerprint.empty());
}

TEST_CASE("parse_patch keeps body lines verbatim, including keywords and blanks")
{
    auto p = parse_patch("REPLACE 1 1\n\n  DELETE 3 4\n\tx\r\nEND_EDIT\r\n");
    REQUIRE(p.edits.size() == 1);
    CHECK(p.edits[0].new_lines == std::vector<std::string>{"", "  DELETE 3 4", "\tx\r"});
}

TEST_CASE("parse_patch rejects malformed blocks")
{
    CHECK_THROWS_AS(parse_patch("no edits here\n```\ncode\n```\n"), EmptyPatch);
    CHECK_THROWS_AS(parse_patch(""), EmptyPatch);
    CHECK_THROWS_AS(parse_patch("REPLACE 3\nx\nEND_EDIT\n"), MalformedPatch);
    CHECK_THROWS_AS(parse_patch("REPLACE 4 3\nx\nEND_EDIT\n"), MalformedPatch);
    CHECK_THROWS_AS(parse_patch("REPLACE 0 1\nx\nEND_EDIT\n"), MalformedPatch);
    CHECK_THROWS_AS(parse_patch("INSERT two\nx\nEND_EDIT\n"), MalformedPatch);
    CHECK_THROWS_AS(parse_patch("INSERT 2 3\nx\nEND_EDIT\n"), MalformedPatch);
    CHECK_THROWS_AS(parse_patch("INSERT 2\nx\n"), MalformedPatch);
    CHECK_THROWS_AS(parse_patch("DELETE 1 2\nstray\nEND_EDIT\n"), MalformedPatch);
    CHECK_THROWS_AS(parse_patch("REPLACE 1 2\nEND_EDIT\n"), MalformedPatch);
    CHECK_THROWS_AS(parse_patch("REPLACE -1 2\nx\nEND_EDIT\n"), MalformedPatch);
}

TEST_CASE("apply_patch examples")
{
    const std::string src = "a\nb\nc\nd\n";
    CHECK(apply_patch(src, bound({PatchEdit::replace(2, 3, {"B", "C", "X"})}, src)) == "a\nB\nC\nX\nd\n");
    CHECK(apply_patch(src, bound({PatchEdit::remove(1, 4)}, src)) == "");
    CHECK(apply_patch(src, bound({PatchEdit::insert(5, {"e"})}, src)) == "a\nb\nc\nd\ne\n");
    CHECK(apply_patch(src, bound({PatchEdit::insert(1, {"z"}), PatchEdit::remove(4, 4)}, src)) == "z\na\nb\nc\n");
    const std::string no_nl = "a\nb";
    CHECK(apply_patch(no_nl, bound({PatchEdit::replace(2, 2, {"c"})}, no_nl)) == "a\nc");
    CHECK(apply_patch("", bound({PatchEdit::insert(1, {"x"})}, "")) == "x");
}

TEST_CASE("apply_patch rejects stale, out-of-range and overlapping patches")
{
    const std::string src = "a\nb\nc\n";
    auto p = bound({PatchEdit::replace(1, 1, {"x"})}, src);
    CHECK_THROWS_AS(apply_patch("a\nb\nC\n", p), FingerprintMismatch);
    CHECK_THROWS_AS(apply_patch(src, bound({PatchEdit::replace(3, 4, {"x"})}, src)), RangeOutOfBounds);
    CHECK_THROWS_AS(apply_patch(src, bound({PatchEdit::insert(5, {"x"})}, src)), RangeOutOfBounds);
    CHECK_THROWS_AS(apply_patch(src, bound({PatchEdit::remove(2, 1)}, src)), RangeOutOfBounds);
    CHECK_THROWS_AS(apply_patch(src, bound({PatchEdit::replace(1, 2, {"x"}), PatchEdit::remove(2, 3)}, src)),
                    OverlappingEdits);
    CHECK_THROWS_AS(apply_patch(src, bound({PatchEdit::insert(2, {"x"}), PatchEdit::insert(2, {"y"})}, src)),
                    OverlappingEdits);
    CHECK_THROWS_AS(apply_patch(src, bound({PatchEdit::insert(2, {"x"}), PatchEdit::remove(2, 2)}, src)),
                    OverlappingEdits);
    // the widest earlier edit must be remembered, not just the previous one
    CHECK_THROWS_AS(apply_patch(src, bound({PatchEdit::remove(1, 3), PatchEdit::insert(2, {"y"}),
                                            PatchEdit::replace(3, 3, {"z"})},
                                           src)),
                    OverlappingEdits);
}

TEST_CASE("property: apply_patch matches the splice oracle")
{
    std::mt19937_64 rng(20240611);
    int valid = 0, invalid = 0;
    for (int i = 0; i < 2000; ++i) {
        auto src = kagent::testing::random_source(rng);
        auto n = kagent::testing::line_count(src);
        auto edits = kagent::testing::random_valid_edits(rng, n);
        if (i % 2)
            edits = kagent::testing::corrupt_edits(rng, edits, n);
        auto expected = oracle_apply(src, edits);
        const std::string before = src;
        auto patch = bound(edits, src);
        if (expected) {
            ++valid;
            REQUIRE(apply_patch(src, patch) == *expected);
        } else {
            ++invalid;
            CHECK_THROWS_AS(apply_patch(src, patch), PatchError);
            REQUIRE(src == before);
        }
    }
    CHECK(valid >= 1000);
    CHECK(invalid >= 900);
}

TEST_CASE("property: format_patch and parse_patch round-trip")
{
    std::mt19937_64 rng(7);
    for (int i = 0; i < 500; ++i) {
        auto src = kagent::testing::random_source(rng);
        auto edits = kagent::testing::random_valid_edits(rng, kagent::testing::line_count(src));
        auto patch = bound(edits, src);
        std::stable_sort(patch.edits.begin(), patch.edits.end(),
                         [](const PatchEdit& a, const PatchEdit& b) { return a.start_line < b.start_line; });
        auto reparsed = bind_patch(parse_patch("narration\n" + format_patch(patch) + "trailing\n"), "v001-test", src);
        REQUIRE(reparsed == patch);
    }
}

TEST_CASE("property: disjoint patches compose in either order")
{
    std::mt19937_64 rng(99);
    for (int i = 0; i < 300; ++i) {
        auto src = kagent::testing::random_source(rng);
        auto n = kagent::testing::line_count(src);
        auto edits = kagent::testing::random_valid_edits(rng, n);
        if (edits.size() < 2)
            continue;
        std::sort(edits.begin(), edits.end(),
                  [](const PatchEdit& a, const PatchEdit& b) { return a.start_line < b.start_line; });
        // Applying the later half first keeps the earlier half's line numbers valid.
        std::size_t cut = edits.size() / 2;
        std::vector<PatchEdit> head(edits.begin(), edits.begin() + static_cast<long>(cut));
        std::vector<PatchEdit> tail(edits.begin() + static_cast<long>(cut), edits.end());
        auto mid = apply_patch(src, bound(tail, src));
        auto two_step = apply_patch(mid, bound(head, mid));
        REQUIRE(two_step == apply_patch(src, bound(edits, src)));
    }
}

TEST_CASE("diff_stat counts lines per kind")
{
    Patch p;
    p.edits = {PatchEdit::insert(1, {"a", "b"}), PatchEdit::remove(3, 5), PatchEdit::replace(7, 8, {"x", "y", "z"})};
    CHECK(diff_stat(p) == DiffStat{2, 3, 3});
}
