#include <doctest.h>

#include "stratkit/prompt.hpp"
#include "test_util.hpp"

using namespace stratkit;

namespace {

Dataset workshop() { return parse_dataset(testutil::workshop_csv(), testutil::workshop_schema()); }

}  // namespace

TEST_CASE("standard prompt matches the golden file byte for byte") {
    const Dataset d = workshop();
    const std::string golden = testutil::slurp(testutil::data_dir() / "golden/prompt_basic.txt");
    const std::string first = render_prompt(d.units[0], d.schema, testutil::workshop_context());
    const std::string second = render_prompt(d.units[0], d.schema, testutil::workshop_context());
    CHECK(first == golden);
    CHECK(first == second);
    CHECK(first.find("<individual_characteristics>\n- age: 34\n") != std::string::npos);
}

TEST_CASE("context validation") {
    CHECK_ERRC(ExperimentContext::make("", "o", "t", "c", "tr", "1", "2"), Errc::InvalidContext);
    CHECK_ERRC(ExperimentContext::make("b", "o", "t", "same", "same", "1", "2"), Errc::InvalidContext);
    CHECK_ERRC(ExperimentContext::make("b", "o", "t", "c", "tr", "  ", "2"), Errc::InvalidContext);
    CHECK_NOTHROW(ExperimentContext::make("b", "o", "t", "c", "tr", "1", "2"));
}

TEST_CASE("custom templates bind schema variables and reject unknown names") {
    const Dataset d = workshop();
    const PromptTemplate ok("Age {{age}}; gender {{gender}}; essay {{essay}}; bg {{context.background}}");
    CHECK_NOTHROW(ok.check_bindings(d.schema));
    CHECK(render_prompt(d.units[0], d.schema, testutil::workshop_context(), ok) ==
          "Age 34; gender female; essay I want a better job. Also curious.; bg "
          "A field experiment offering a job-search workshop to unemployed adults in a mid-size city.");

    const PromptTemplate unbound("Income {{income}}");
    CHECK_ERRC(unbound.check_bindings(d.schema), Errc::UnboundPlaceholder);
    CHECK_ERRC(render_prompt(d.units[0], d.schema, testutil::workshop_context(), unbound),
               Errc::UnboundPlaceholder);
    CHECK_ERRC(PromptTemplate("{{context.nonsense}}"), Errc::UnboundPlaceholder);
}

TEST_CASE("parse_prediction accepts the documented response shape") {
    const auto p = parse_prediction("<prediction>\n0.2\n0.5\n</prediction>");
    CHECK(p.control == 0.2);
    CHECK(p.treatment == 0.5);

    const auto q = parse_prediction("noise <prediction> 1 \n 1 </prediction>");
    CHECK(q.control == 1.0);
    CHECK(q.treatment == 1.0);

    const auto r = parse_prediction("Sure.\n<prediction>\n\n  -3.5e1\r\n+2\n</prediction>\n<prediction>\n9\n9\n</prediction>");
    CHECK(r.control == -35.0);
    CHECK(r.treatment == 2.0);
}

TEST_CASE("parse_prediction error cases") {
    CHECK_ERRC(parse_prediction("I think about 3 and 4."), Errc::MissingPredictionBlock);
    CHECK_ERRC(parse_prediction("<prediction>\n3\n4\n"), Errc::MissingPredictionBlock);
    try {
        parse_prediction("<prediction>\n0.2\n</prediction>");
        FAIL("expected WrongLineCount");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::WrongLineCount);
        CHECK(e.subject() == "1");
    }
    CHECK_ERRC(parse_prediction("<prediction>\n1\n2\n3\n</prediction>"), Errc::WrongLineCount);
    try {
        parse_prediction("<prediction>\nabout 2\n3\n</prediction>");
        FAIL("expected MalformedNumber");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MalformedNumber);
        CHECK(e.subject() == "about 2");
    }
    CHECK_ERRC(parse_prediction("<prediction>\nnan\n3\n</prediction>"), Errc::MalformedNumber);
}

TEST_CASE("parse inverts format on the two numbers") {
    for (double a : {0.0, -1.25, 3.0e-9, 12345.678, 1.0 / 3.0}) {
        for (double b : {0.5, -0.0, 7.0e12, 2.0 / 3.0}) {
            const auto p = parse_prediction(format_prediction_response(a, b));
            CHECK(p.control == a);
            CHECK(p.treatment == b);
        }
    }
}
