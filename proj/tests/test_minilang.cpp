#include <gtest/gtest.h>

#include <algorithm>

#include "ligerlab/minilang.hpp"

using namespace ligerlab;
using namespace ligerlab::minilang;

namespace {

const char* kBubble = R"(fn bubble(a: int[]) {
  n: int = len(a);
  for i in 0..n - 1 {
    for j in 0..n - 1 - i {
      if (a[j] > a[j + 1]) {
        swap(a, j, j + 1);
      }
    }
  }
})";

Value arr(Value::Array a) { return Value::array(std::move(a)); }

}  // namespace

TEST(Parse, SimpleFunction) {
  auto p = parse("fn f(x:int){y:int=x+2; return y;}");
  EXPECT_EQ(p.name, "f");
  EXPECT_EQ(p.body.size(), 2u);
  EXPECT_EQ(p.variables, (std::vector<std::string>{"x", "y"}));
  EXPECT_TRUE(p.branch_sites.empty());
}

TEST(Parse, SyntaxErrorAtEof) {
  try {
    parse("fn f(){");
    FAIL() << "expected a syntax error";
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.line(), 1);
    EXPECT_GE(e.column(), 7);
  }
}

TEST(Parse, RejectsUnknownVariablesAndTypeErrors) {
  EXPECT_THROW(parse("fn f(){ return z; }"), SyntaxError);
  EXPECT_THROW(parse("fn f(x:int){ x = true; }"), SyntaxError);
  EXPECT_THROW(parse("fn f(x:int){ x: bool = true; }"), SyntaxError);
}

TEST(Parse, BubbleSortHasThreeBranchSites) {
  auto p = parse(kBubble);
  EXPECT_EQ(p.branch_sites.size(), 3u);
  for (std::size_t i = 0; i < p.statements.size(); ++i) EXPECT_EQ(p.statements[i].id, static_cast<int>(i));
}

TEST(Parse, IsDeterministicAndRoundTrips) {
  auto a = parse(kBubble);
  auto b = parse(kBubble);
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_EQ(a.source(), b.source());
  auto c = parse(a.source());
  EXPECT_EQ(c.tokens, a.tokens);
  for (std::size_t i = 0; i < a.statements.size(); ++i) EXPECT_EQ(c.statements[i].tokens, a.statements[i].tokens);
}

TEST(Execute, BubbleSortSortsFigureArray) {
  auto p = parse(kBubble);
  auto t = execute(p, {arr({8, 5, 1, 4, 3})});
  ASSERT_TRUE(t.ok());
  EXPECT_EQ(t.final_state().values[0], arr({1, 3, 4, 5, 8}));
}

TEST(Execute, FirstMutationIsFirstSwap) {
  auto p = parse(kBubble);
  auto t = execute(p, {arr({8, 5, 1, 4, 3})});
  Value prev = t.initial_state.values[0];
  for (const auto& s : t.steps) {
    if (!(s.state.values[0] == prev)) {
      EXPECT_EQ(s.state.values[0], arr({5, 8, 1, 4, 3}));
      return;
    }
  }
  FAIL() << "array never changed";
}

TEST(Execute, SingleReturn) {
  auto p = parse("fn f(x:int){return x;}");
  auto t = execute(p, {Value::integer(7)});
  ASSERT_EQ(t.steps.size(), 1u);
  EXPECT_EQ(t.steps[0].state.values, std::vector<Value>{Value::integer(7)});
  EXPECT_EQ(t.return_value, Value::integer(7));
}

TEST(Execute, StatesHaveFixedWidthAndBottomBeforeDeclaration) {
  auto p = parse("fn f(x:int){ y: int = x * 2; z: bool = y > 3; return y; }");
  auto t = execute(p, {Value::integer(1)});
  EXPECT_TRUE(t.initial_state.values[1].is_bottom());
  EXPECT_TRUE(t.initial_state.values[2].is_bottom());
  for (const auto& s : t.steps) EXPECT_EQ(s.state.values.size(), p.variables.size());
  EXPECT_EQ(t.steps[0].state.values[1], Value::integer(2));
  EXPECT_TRUE(t.steps[0].state.values[2].is_bottom());
}

TEST(Execute, GuardsRecordSteps) {
  auto p = parse("fn f(x:int){ if (x > 0) { x = 1; } else { x = 2; } return x; }");
  auto t = execute(p, {Value::integer(5)});
  ASSERT_EQ(t.steps.size(), 3u);
  EXPECT_EQ(t.steps[0].stmt, 0);
  EXPECT_EQ(t.covered_branches, (Coverage{{0, true}}));
}

TEST(Execute, RuntimeErrorsAndStepLimit) {
  auto oob = parse("fn f(a:int[]){ return a[5]; }");
  EXPECT_EQ(execute(oob, {arr({1})}).status, TraceStatus::RuntimeError);
  auto div = parse("fn f(x:int){ return 10 / x; }");
  EXPECT_EQ(execute(div, {Value::integer(0)}).status, TraceStatus::RuntimeError);
  auto loop = parse("fn f(x:int){ while (true) { x += 1; } }");
  auto t = execute(loop, {Value::integer(0)}, {100});
  EXPECT_EQ(t.status, TraceStatus::StepLimitExceeded);
  EXPECT_THROW(execute(loop, {Value::integer(0)}, {0}), Error);
}

TEST(Execute, ChecksArityAndTypes) {
  auto p = parse("fn f(x:int){ return x; }");
  EXPECT_THROW(execute(p, {}), Error);
  EXPECT_THROW(execute(p, {Value::boolean(true)}), Error);
  EXPECT_THROW(execute(parse("fn f(a:int[]){ return 0; }"), {arr(Value::Array(17, 0))}), Error);
}

TEST(Execute, WrappingArithmeticAndTruncatingDivision) {
  auto p = parse("fn f(x:int, y:int){ return x / y; }");
  EXPECT_EQ(execute(p, {Value::integer(-7), Value::integer(2)}).return_value, Value::integer(-3));
  auto m = parse("fn f(x:int){ return x % 3; }");
  EXPECT_EQ(execute(m, {Value::integer(-7)}).return_value, Value::integer(-1));
  auto w = parse("fn f(x:int){ return x + 1; }");
  EXPECT_EQ(execute(w, {Value::integer(INT64_MAX)}).return_value, Value::integer(INT64_MIN));
}

TEST(Execute, IsDeterministic) {
  auto p = parse(kBubble);
  auto a = execute(p, {arr({3, 1, 2})});
  auto b = execute(p, {arr({3, 1, 2})});
  EXPECT_EQ(a, b);
}

TEST(Execute, EquivalentRewritesShareStateTraces) {
  auto add = parse("fn f(x:int){ y: int = x + x; return y; }");
  auto mul = parse("fn f(x:int){ y: int = x * 2; return y; }");
  EXPECT_NE(add.tokens, mul.tokens);
  for (std::int64_t x = -20; x <= 20; ++x) {
    auto a = execute(add, {Value::integer(x)});
    auto b = execute(mul, {Value::integer(x)});
    ASSERT_EQ(a.steps.size(), b.steps.size());
    for (std::size_t i = 0; i < a.steps.size(); ++i) EXPECT_EQ(a.steps[i].state, b.steps[i].state);
  }
}

TEST(Tokenize, Examples) {
  auto p = parse("fn f(i:int, a:int[]){ i += i; i *= 2; if (a[i] > a[i+1]) { i = 0; } }");
  EXPECT_EQ(p.statements[0].tokens, (std::vector<std::string>{"i", "+=", "i"}));
  EXPECT_EQ(p.statements[1].tokens, (std::vector<std::string>{"i", "*=", "2"}));
  EXPECT_EQ(p.statements[2].tokens,
            (std::vector<std::string>{"a", "[", "i", "]", ">", "a", "[", "i", "+", "1", "]"}));
  EXPECT_EQ(tokenize_statement(p.body[0]), p.statements[0].tokens);
}

TEST(Tokenize, NegativeLiteralsAreCanonical) {
  auto p = parse("fn f(x:int){ x = -5; x = x - 5; x = x + -5; }");
  EXPECT_EQ(p.statements[0].tokens, (std::vector<std::string>{"x", "=", "-5"}));
  EXPECT_EQ(p.statements[1].tokens, (std::vector<std::string>{"x", "=", "x", "-", "5"}));
  EXPECT_EQ(p.statements[2].tokens, (std::vector<std::string>{"x", "=", "x", "+", "-5"}));
  EXPECT_EQ(parse(p.source()).tokens, p.tokens);
}

TEST(RandomInputs, DeterministicAndInRange) {
  auto p = parse("fn f(x:int){ return x; }");
  EXPECT_EQ(random_inputs(p, 5, 1), random_inputs(p, 5, 1));
  EXPECT_THROW(random_inputs(p, 0, 1), Error);
  for (const auto& in : random_inputs(p, 1000, 2)) {
    EXPECT_GE(in[0].as_int(), -50);
    EXPECT_LE(in[0].as_int(), 50);
  }
  auto q = parse("fn f(a:int[]){ return 0; }");
  for (const auto& in : random_inputs(q, 500, 3)) {
    EXPECT_GE(in[0].as_array().size(), 1u);
    EXPECT_LE(in[0].as_array().size(), 16u);
  }
}

TEST(Coverage, UnionOfTraces) {
  EXPECT_TRUE(branch_coverage({}).empty());
  ExecutionTrace a, b;
  a.covered_branches = {{1, true}};
  b.covered_branches = {{1, false}, {2, true}};
  EXPECT_EQ(branch_coverage({a}), (Coverage{{1, true}}));
  EXPECT_EQ(branch_coverage({a, b}), (Coverage{{1, true}, {1, false}, {2, true}}));
}

TEST(Coverage, MonotoneOverSupersets) {
  auto p = parse(kBubble);
  std::vector<ExecutionTrace> ts;
  Coverage prev;
  for (const auto& in : random_inputs(p, 30, 4)) {
    ts.push_back(execute(p, in));
    auto c = branch_coverage(ts);
    EXPECT_TRUE(std::includes(c.begin(), c.end(), prev.begin(), prev.end()));
    prev = c;
  }
}

TEST(TraceJson, RoundTrip) {
  auto p = parse(kBubble);
  std::vector<Value> in{arr({2, 1})};
  auto t = execute(p, in);
  auto rec = trace_from_json(trace_to_json("bubble", in, t));
  EXPECT_EQ(rec.program_id, "bubble");
  EXPECT_EQ(rec.input, in);
  ASSERT_EQ(rec.trace.steps.size(), t.steps.size());
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    EXPECT_EQ(rec.trace.steps[i].stmt, t.steps[i].stmt);
    EXPECT_EQ(rec.trace.steps[i].state, t.steps[i].state);
  }
  EXPECT_EQ(rec.trace.covered_branches, t.covered_branches);
}
