#ifndef LIGERLAB_MINILANG_HPP
#define LIGERLAB_MINILANG_HPP

// minilang: a small imperative language (ints, bools, bounded int arrays)
// with a tracing interpreter. Every executed statement is recorded together
// with the full program state immediately after it.

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ligerlab/util.hpp"

namespace ligerlab::minilang {

inline constexpr std::size_t kDefaultMaxArrayLength = 16;
inline constexpr std::size_t kDefaultStepLimit = 10000;

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, int line, int column)
      : Error("syntax error at " + std::to_string(line) + ":" + std::to_string(column) + ": " +
              what),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

// ---------------------------------------------------------------------------
// Values

enum class Type { Int, Bool, IntArray };

inline std::string type_name(Type t) {
  switch (t) {
    case Type::Int: return "int";
    case Type::Bool: return "bool";
    case Type::IntArray: return "int[]";
  }
  return "?";
}

/// Sentinel for a variable that has not been assigned yet.
struct Bottom {
  friend bool operator==(Bottom, Bottom) { return true; }
};

class Value {
 public:
  using Array = std::vector<std::int64_t>;

  Value() = default;
  static Value bottom() { return Value(); }
  static Value integer(std::int64_t v) { return Value(Storage(std::in_place_index<1>, v)); }
  static Value boolean(bool v) { return Value(Storage(std::in_place_index<2>, v)); }
  static Value array(Array v) { return Value(Storage(std::in_place_index<3>, std::move(v))); }

  bool is_bottom() const { return data_.index() == 0; }
  bool is_int() const { return data_.index() == 1; }
  bool is_bool() const { return data_.index() == 2; }
  bool is_array() const { return data_.index() == 3; }

  std::int64_t as_int() const { return std::get<1>(data_); }
  bool as_bool() const { return std::get<2>(data_); }
  const Array& as_array() const { return std::get<3>(data_); }
  Array& as_array() { return std::get<3>(data_); }

  friend bool operator==(const Value&, const Value&) = default;

  std::string to_string() const {
    if (is_bottom()) return "_|_";
    if (is_int()) return std::to_string(as_int());
    if (is_bool()) return as_bool() ? "true" : "false";
    std::string out = "[";
    for (std::size_t i = 0; i < as_array().size(); ++i) {
      if (i) out += ",";
      out += std::to_string(as_array()[i]);
    }
    return out + "]";
  }

 private:
  using Storage = std::variant<Bottom, std::int64_t, bool, Array>;
  explicit Value(Storage s) : data_(std::move(s)) {}
  Storage data_;
};

inline nlohmann::json value_to_json(const Value& v) {
  if (v.is_bottom()) return nullptr;
  if (v.is_int()) return v.as_int();
  if (v.is_bool()) return v.as_bool();
  return v.as_array();
}

inline Value value_from_json(const nlohmann::json& j) {
  if (j.is_null()) return Value::bottom();
  if (j.is_boolean()) return Value::boolean(j.get<bool>());
  if (j.is_number_integer()) return Value::integer(j.get<std::int64_t>());
  if (j.is_array()) return Value::array(j.get<Value::Array>());
  throw Error("cannot decode value from json: " + j.dump());
}

/// Values of every declared variable, in declaration order.
struct ProgramState {
  std::vector<Value> values;
  friend bool operator==(const ProgramState&, const ProgramState&) = default;
};

// ---------------------------------------------------------------------------
// Lexer

enum class TokenKind { Ident, Keyword, Int, Punct, End };

struct Token {
  TokenKind kind;
  std::string text;
  int line;
  int column;
};

inline bool is_keyword(std::string_view s) {
  static const std::set<std::string, std::less<>> kKeywords = {
      "fn", "if", "else", "while", "for", "in", "return", "true", "false", "int", "bool", "len"};
  return kKeywords.count(s) > 0;
}

inline std::vector<Token> lex(std::string_view src) {
  static const char* kPuncts[] = {"..", "==", "!=", "<=", ">=", "&&", "||", "+=", "-=", "*=",
                                  "/=", "%=", "(",  ")",  "{",  "}",  "[",  "]",  ",",  ";",
                                  ":",  "+",  "-",  "*",  "/",  "%",  "<",  ">",  "=",  "!"};
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  auto value_ending = [&]() {
    if (out.empty()) return false;
    const Token& t = out.back();
    return t.kind == TokenKind::Ident || t.kind == TokenKind::Int || t.text == ")" ||
           t.text == "]" || t.text == "true" || t.text == "false";
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    int tl = line, tc = col;
    bool neg_literal = c == '-' && i + 1 < src.size() &&
                       std::isdigit(static_cast<unsigned char>(src[i + 1])) && !value_ending();
    if (std::isdigit(static_cast<unsigned char>(c)) || neg_literal) {
      std::size_t j = i + (neg_literal ? 1 : 0);
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      std::string text(src.substr(i, j - i));
      advance(j - i);
      out.push_back({TokenKind::Int, text, tl, tc});
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_'))
        ++j;
      std::string text(src.substr(i, j - i));
      advance(j - i);
      out.push_back({is_keyword(text) ? TokenKind::Keyword : TokenKind::Ident, text, tl, tc});
      continue;
    }
    bool matched = false;
    for (const char* p : kPuncts) {
      std::string_view ps(p);
      if (src.substr(i, ps.size()) == ps) {
        advance(ps.size());
        out.push_back({TokenKind::Punct, std::string(ps), tl, tc});
        matched = true;
        break;
      }
    }
    if (!matched) throw SyntaxError(std::string("unexpected character '") + c + "'", tl, tc);
  }
  out.push_back({TokenKind::End, "", line, col});
  return out;
}

inline std::vector<std::string> lex_texts(std::string_view src) {
  std::vector<std::string> out;
  for (auto& t : lex(src))
    if (t.kind != TokenKind::End) out.push_back(t.text);
  return out;
}

// ---------------------------------------------------------------------------
// AST

struct Expr {
  enum class Kind { IntLit, BoolLit, Var, Index, Len, ArrayLit, Unary, Binary };
  Kind kind = Kind::IntLit;
  std::int64_t int_value = 0;
  bool bool_value = false;
  std::string name;  // Var / Index / Len target
  std::string op;    // Unary / Binary
  int slot = -1;     // resolved variable index
  std::vector<Expr> kids;

  static Expr int_lit(std::int64_t v) {
    Expr e;
    e.kind = Kind::IntLit;
    e.int_value = v;
    return e;
  }
  static Expr bool_lit(bool v) {
    Expr e;
    e.kind = Kind::BoolLit;
    e.bool_value = v;
    return e;
  }
  static Expr var(std::string n) {
    Expr e;
    e.kind = Kind::Var;
    e.name = std::move(n);
    return e;
  }
  static Expr binary(std::string op, Expr l, Expr r) {
    Expr e;
    e.kind = Kind::Binary;
    e.op = std::move(op);
    e.kids.push_back(std::move(l));
    e.kids.push_back(std::move(r));
    return e;
  }
  bool is_literal() const { return kind == Kind::IntLit || kind == Kind::BoolLit; }
};

enum class StmtKind { Assign, ArrayStore, If, While, For, Return, Call };

inline std::string stmt_kind_name(StmtKind k) {
  switch (k) {
    case StmtKind::Assign: return "assign";
    case StmtKind::ArrayStore: return "array-store";
    case StmtKind::If: return "if-guard";
    case StmtKind::While: return "while-guard";
    case StmtKind::For: return "for-guard";
    case StmtKind::Return: return "return";
    case StmtKind::Call: return "call";
  }
  return "?";
}

struct Stmt {
  StmtKind kind = StmtKind::Assign;
  int id = -1;
  std::string target;              // assigned variable, array, loop variable or callee
  int slot = -1;
  std::optional<Type> decl_type;   // Assign: present for "x: T = e"
  std::string op = "=";            // Assign / ArrayStore: = += -= *= /= %=
  std::optional<Expr> index;       // ArrayStore
  std::optional<Expr> value;       // Assign / ArrayStore / Return value; If / While guard
  std::optional<Expr> lo, hi;      // For bounds
  std::vector<Expr> args;          // Call
  std::vector<Stmt> body;
  std::vector<Stmt> else_body;
  bool has_else = false;
};

struct Param {
  std::string name;
  Type type;
};

using StatementId = int;
using BranchSiteId = int;

struct BranchArm {
  BranchSiteId site;
  bool taken;
  auto operator<=>(const BranchArm&) const = default;
};

using Coverage = std::set<BranchArm>;

/// Flat per-statement view, indexed by StatementId.
struct Statement {
  StatementId id;
  StmtKind kind;
  std::vector<std::string> tokens;
  BranchSiteId branch_site = -1;
};

struct BranchSite {
  BranchSiteId id;
  StatementId guard;
};

struct Program {
  std::string name;
  std::vector<Param> params;
  std::vector<Stmt> body;
  std::vector<std::string> tokens;
  std::vector<std::string> variables;
  std::vector<Type> variable_types;
  std::vector<BranchSite> branch_sites;
  std::vector<Statement> statements;

  std::size_t num_variables() const { return variables.size(); }
  std::string source() const;
};

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

inline int precedence(const std::string& op) {
  if (op == "||") return 1;
  if (op == "&&") return 2;
  if (op == "==" || op == "!=") return 3;
  if (op == "<" || op == "<=" || op == ">" || op == ">=") return 4;
  if (op == "+" || op == "-") return 5;
  if (op == "*" || op == "/" || op == "%") return 6;
  return 0;
}

inline int expr_precedence(const Expr& e) {
  if (e.kind == Expr::Kind::Binary) return precedence(e.op);
  if (e.kind == Expr::Kind::Unary) return 7;
  return 8;
}

inline void expr_tokens(const Expr& e, std::vector<std::string>& out) {
  switch (e.kind) {
    case Expr::Kind::IntLit: out.push_back(std::to_string(e.int_value)); break;
    case Expr::Kind::BoolLit: out.push_back(e.bool_value ? "true" : "false"); break;
    case Expr::Kind::Var: out.push_back(e.name); break;
    case Expr::Kind::Index:
      out.push_back(e.name);
      out.push_back("[");
      expr_tokens(e.kids[0], out);
      out.push_back("]");
      break;
    case Expr::Kind::Len:
      out.insert(out.end(), {"len", "(", e.name, ")"});
      break;
    case Expr::Kind::ArrayLit:
      out.push_back("[");
      for (std::size_t i = 0; i < e.kids.size(); ++i) {
        if (i) out.push_back(",");
        expr_tokens(e.kids[i], out);
      }
      out.push_back("]");
      break;
    case Expr::Kind::Unary: {
      out.push_back(e.op);
      bool paren = expr_precedence(e.kids[0]) < 7;
      if (paren) out.push_back("(");
      expr_tokens(e.kids[0], out);
      if (paren) out.push_back(")");
      break;
    }
    case Expr::Kind::Binary: {
      int p = precedence(e.op);
      bool lp = expr_precedence(e.kids[0]) < p;
      bool rp = expr_precedence(e.kids[1]) <= p;
      if (lp) out.push_back("(");
      expr_tokens(e.kids[0], out);
      if (lp) out.push_back(")");
      out.push_back(e.op);
      if (rp) out.push_back("(");
      expr_tokens(e.kids[1], out);
      if (rp) out.push_back(")");
      break;
    }
  }
}

inline void type_tokens(Type t, std::vector<std::string>& out) {
  out.push_back(t == Type::Bool ? "bool" : "int");
  if (t == Type::IntArray) {
    out.push_back("[");
    out.push_back("]");
  }
}

inline bool ends_operand(const std::string& t) {
  if (t.empty()) return false;
  if (t == ")" || t == "]" || t == "true" || t == "false") return true;
  auto c = static_cast<unsigned char>(t[0]);
  if (std::isdigit(c) || (c == '-' && t.size() > 1)) return true;
  return (std::isalpha(c) || c == '_') && !is_keyword(t);
}

// Joins tokens into readable text that lexes back to the same tokens.
inline std::string join_tokens(const std::vector<std::string>& toks) {
  std::string out;
  for (std::size_t k = 0; k < toks.size(); ++k) {
    const std::string& t = toks[k];
    if (k > 0) {
      const std::string& prev = toks[k - 1];
      bool prev_unary = prev == "!" || (prev == "-" && (k < 2 || !ends_operand(toks[k - 2])));
      bool tight = prev == "(" || prev == "[" || prev_unary || t == ")" || t == "]" || t == "," ||
                   t == ";" || t == ":" || (t == "[" && ends_operand(prev)) ||
                   (t == "(" && (prev == "len" || prev == "swap"));
      if (!tight) out += ' ';
    }
    out += t;
  }
  return out;
}

}  // namespace detail

inline std::vector<std::string> expr_tokens(const Expr& e) {
  std::vector<std::string> out;
  detail::expr_tokens(e, out);
  return out;
}

/// Canonical token sequence of one statement. Guards render as their
/// condition; loops render their header.
inline std::vector<std::string> tokenize_statement(const Stmt& s) {
  std::vector<std::string> out;
  switch (s.kind) {
    case StmtKind::Assign:
      out.push_back(s.target);
      if (s.decl_type) {
        out.push_back(":");
        detail::type_tokens(*s.decl_type, out);
      }
      out.push_back(s.op);
      detail::expr_tokens(*s.value, out);
      break;
    case StmtKind::ArrayStore:
      out.push_back(s.target);
      out.push_back("[");
      detail::expr_tokens(*s.index, out);
      out.push_back("]");
      out.push_back(s.op);
      detail::expr_tokens(*s.value, out);
      break;
    case StmtKind::If:
    case StmtKind::While:
      detail::expr_tokens(*s.value, out);
      break;
    case StmtKind::For:
      out.push_back(s.target);
      out.push_back("in");
      detail::expr_tokens(*s.lo, out);
      out.push_back("..");
      detail::expr_tokens(*s.hi, out);
      break;
    case StmtKind::Return:
      out.push_back("return");
      if (s.value) detail::expr_tokens(*s.value, out);
      break;
    case StmtKind::Call:
      out.push_back(s.target);
      out.push_back("(");
      for (std::size_t i = 0; i < s.args.size(); ++i) {
        if (i) out.push_back(",");
        detail::expr_tokens(s.args[i], out);
      }
      out.push_back(")");
      break;
  }
  return out;
}

namespace detail {

inline void render_block(const std::vector<Stmt>& body, int indent, std::string& out);

inline void render_stmt(const Stmt& s, int indent, std::string& out) {
  std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  auto cond = [&](const Expr& e) { return join_tokens(expr_tokens(e)); };
  switch (s.kind) {
    case StmtKind::If:
      out += pad + "if (" + cond(*s.value) + ") {\n";
      render_block(s.body, indent + 1, out);
      out += pad + "}";
      if (s.has_else) {
        out += " else {\n";
        render_block(s.else_body, indent + 1, out);
        out += pad + "}";
      }
      out += "\n";
      break;
    case StmtKind::While:
      out += pad + "while (" + cond(*s.value) + ") {\n";
      render_block(s.body, indent + 1, out);
      out += pad + "}\n";
      break;
    case StmtKind::For:
      out += pad + "for " + join_tokens(tokenize_statement(s)) + " {\n";
      render_block(s.body, indent + 1, out);
      out += pad + "}\n";
      break;
    default:
      out += pad + join_tokens(tokenize_statement(s)) + ";\n";
      break;
  }
}

inline void render_block(const std::vector<Stmt>& body, int indent, std::string& out) {
  for (const auto& s : body) render_stmt(s, indent, out);
}

}  // namespace detail

inline std::string render_function(const std::string& name, const std::vector<Param>& params,
                                   const std::vector<Stmt>& body) {
  std::string out = "fn " + name + "(";
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (i) out += ", ";
    out += params[i].name + ": " + type_name(params[i].type);
  }
  out += ") {\n";
  detail::render_block(body, 1, out);
  out += "}\n";
  return out;
}

inline std::string Program::source() const { return render_function(name, params, body); }

// ---------------------------------------------------------------------------
// Parser

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view src) : toks_(lex(src)) {}

  Program parse_program() {
    Program p;
    expect("fn");
    p.name = expect_ident();
    expect("(");
    if (!at(")")) {
      do {
        Param prm;
        prm.name = expect_ident();
        expect(":");
        prm.type = parse_type();
        declare(prm.name, prm.type, peek_prev());
        p.params.push_back(prm);
      } while (accept(","));
    }
    expect(")");
    p.body = parse_block();
    if (peek().kind != TokenKind::End) fail("trailing input after function body");
    p.variables = names_;
    p.variable_types = types_;
    return p;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& peek_prev() const { return toks_[pos_ > 0 ? pos_ - 1 : 0]; }
  bool at(std::string_view t) const {
    return peek().kind != TokenKind::End && peek().kind != TokenKind::Int && peek().text == t;
  }
  bool accept(std::string_view t) {
    if (!at(t)) return false;
    ++pos_;
    return true;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = peek();
    std::string found = t.kind == TokenKind::End ? "end of input" : "'" + t.text + "'";
    throw SyntaxError(msg + " (found " + found + ")", t.line, t.column);
  }
  void expect(std::string_view t) {
    if (!accept(t)) fail("expected '" + std::string(t) + "'");
  }
  std::string expect_ident() {
    if (peek().kind != TokenKind::Ident) fail("expected identifier");
    return toks_[pos_++].text;
  }

  Type parse_type() {
    if (accept("bool")) return Type::Bool;
    expect("int");
    if (accept("[")) {
      expect("]");
      return Type::IntArray;
    }
    return Type::Int;
  }

  void declare(const std::string& name, Type t, const Token& where) {
    auto it = slots_.find(name);
    if (it != slots_.end()) {
      if (types_[static_cast<std::size_t>(it->second)] != t)
        throw SyntaxError("variable '" + name + "' redeclared with a different type", where.line,
                          where.column);
      return;
    }
    if (name == "len" || name == "swap")
      throw SyntaxError("reserved name '" + name + "'", where.line, where.column);
    slots_[name] = static_cast<int>(names_.size());
    names_.push_back(name);
    types_.push_back(t);
  }

  int resolve(const std::string& name, const Token& where) const {
    auto it = slots_.find(name);
    if (it == slots_.end())
      throw SyntaxError("undeclared variable '" + name + "'", where.line, where.column);
    return it->second;
  }
  Type slot_type(int slot) const { return types_[static_cast<std::size_t>(slot)]; }

  std::vector<Stmt> parse_block() {
    expect("{");
    std::vector<Stmt> out;
    while (!at("}")) {
      if (peek().kind == TokenKind::End) fail("unterminated block");
      out.push_back(parse_stmt());
    }
    expect("}");
    return out;
  }

  void require_type(const Expr& e, Type t, const Token& where, const char* what) {
    Type got = type_of(e, where);
    if (got != t)
      throw SyntaxError(std::string(what) + ": expected " + type_name(t) + ", got " +
                            type_name(got),
                        where.line, where.column);
  }

  Stmt parse_stmt() {
    const Token start = peek();
    Stmt s;
    if (accept("if")) {
      s.kind = StmtKind::If;
      expect("(");
      s.value = parse_expr();
      expect(")");
      require_type(*s.value, Type::Bool, start, "if condition");
      s.body = parse_block();
      if (accept("else")) {
        s.has_else = true;
        if (at("if")) s.else_body.push_back(parse_stmt());
        else s.else_body = parse_block();
      }
      return s;
    }
    if (accept("while")) {
      s.kind = StmtKind::While;
      expect("(");
      s.value = parse_expr();
      expect(")");
      require_type(*s.value, Type::Bool, start, "while condition");
      s.body = parse_block();
      return s;
    }
    if (accept("for")) {
      s.kind = StmtKind::For;
      const Token vt = peek();
      s.target = expect_ident();
      expect("in");
      s.lo = parse_expr();
      expect("..");
      s.hi = parse_expr();
      require_type(*s.lo, Type::Int, vt, "loop lower bound");
      require_type(*s.hi, Type::Int, vt, "loop upper bound");
      declare(s.target, Type::Int, vt);
      s.slot = resolve(s.target, vt);
      s.body = parse_block();
      return s;
    }
    if (accept("return")) {
      s.kind = StmtKind::Return;
      if (!at(";")) s.value = parse_expr();
      expect(";");
      return s;
    }
    if (peek().kind != TokenKind::Ident) fail("expected statement");
    const Token name_tok = peek();
    s.target = expect_ident();
    if (accept("(")) {
      if (s.target != "swap") throw SyntaxError("unsupported call '" + s.target + "'",
                                                name_tok.line, name_tok.column);
      s.kind = StmtKind::Call;
      if (!at(")")) {
        do s.args.push_back(parse_expr());
        while (accept(","));
      }
      expect(")");
      expect(";");
      if (s.args.size() != 3 || s.args[0].kind != Expr::Kind::Var)
        throw SyntaxError("swap expects (array, int, int)", name_tok.line, name_tok.column);
      require_type(s.args[0], Type::IntArray, name_tok, "swap array");
      require_type(s.args[1], Type::Int, name_tok, "swap index");
      require_type(s.args[2], Type::Int, name_tok, "swap index");
      return s;
    }
    if (accept(":")) {
      s.kind = StmtKind::Assign;
      s.decl_type = parse_type();
      expect("=");
      s.value = parse_expr();
      require_type(*s.value, *s.decl_type, name_tok, "initializer");
      declare(s.target, *s.decl_type, name_tok);
      s.slot = resolve(s.target, name_tok);
      expect(";");
      return s;
    }
    s.slot = resolve(s.target, name_tok);
    if (accept("[")) {
      s.kind = StmtKind::ArrayStore;
      if (slot_type(s.slot) != Type::IntArray)
        throw SyntaxError("indexing a non-array", name_tok.line, name_tok.column);
      s.index = parse_expr();
      require_type(*s.index, Type::Int, name_tok, "index");
      expect("]");
      s.op = parse_assign_op();
      s.value = parse_expr();
      require_type(*s.value, Type::Int, name_tok, "array element");
      expect(";");
      return s;
    }
    s.kind = StmtKind::Assign;
    s.op = parse_assign_op();
    s.value = parse_expr();
    if (s.op != "=" && slot_type(s.slot) != Type::Int)
      throw SyntaxError("compound assignment on non-int", name_tok.line, name_tok.column);
    require_type(*s.value, slot_type(s.slot), name_tok, "assignment");
    expect(";");
    return s;
  }

  std::string parse_assign_op() {
    for (const char* op : {"=", "+=", "-=", "*=", "/=", "%="})
      if (accept(op)) return op;
    fail("expected assignment operator");
  }

  Expr parse_expr() { return parse_binary(1); }

  Expr parse_binary(int min_prec) {
    Expr lhs = parse_unary();
    while (true) {
      const Token& t = peek();
      if (t.kind != TokenKind::Punct) break;
      int p = precedence(t.text);
      if (p == 0 || p < min_prec) break;
      std::string op = t.text;
      const Token where = t;
      ++pos_;
      Expr rhs = parse_binary(p + 1);
      lhs = Expr::binary(op, std::move(lhs), std::move(rhs));
      type_of(lhs, where);
    }
    return lhs;
  }

  Expr parse_unary() {
    const Token where = peek();
    if (accept("-") || accept("!")) {
      std::string op = where.text;
      Expr inner = parse_unary();
      if (op == "-" && inner.kind == Expr::Kind::IntLit) {
        inner.int_value = static_cast<std::int64_t>(0ULL - static_cast<std::uint64_t>(inner.int_value));
        return inner;
      }
      if (op == "!" && inner.kind == Expr::Kind::BoolLit) {
        inner.bool_value = !inner.bool_value;
        return inner;
      }
      Expr e;
      e.kind = Expr::Kind::Unary;
      e.op = op;
      e.kids.push_back(std::move(inner));
      type_of(e, where);
      return e;
    }
    return parse_primary();
  }

  Expr parse_primary() {
    const Token t = peek();
    if (t.kind == TokenKind::Int) {
      ++pos_;
      try {
        std::size_t used = 0;
        long long v = std::stoll(t.text, &used);
        if (used != t.text.size()) throw std::out_of_range("junk");
        return Expr::int_lit(v);
      } catch (const std::exception&) {
        throw SyntaxError("integer literal out of range", t.line, t.column);
      }
    }
    if (accept("true")) return Expr::bool_lit(true);
    if (accept("false")) return Expr::bool_lit(false);
    if (accept("(")) {
      Expr e = parse_expr();
      expect(")");
      return e;
    }
    if (accept("len")) {
      expect("(");
      const Token nt = peek();
      Expr e;
      e.kind = Expr::Kind::Len;
      e.name = expect_ident();
      e.slot = resolve(e.name, nt);
      expect(")");
      type_of(e, nt);
      return e;
    }
    if (accept("[")) {
      Expr e;
      e.kind = Expr::Kind::ArrayLit;
      if (!at("]")) {
        do e.kids.push_back(parse_expr());
        while (accept(","));
      }
      expect("]");
      if (e.kids.size() > kDefaultMaxArrayLength)
        throw SyntaxError("array literal longer than " + std::to_string(kDefaultMaxArrayLength),
                          t.line, t.column);
      type_of(e, t);
      return e;
    }
    if (t.kind == TokenKind::Ident) {
      ++pos_;
      Expr e;
      e.name = t.text;
      e.slot = resolve(e.name, t);
      if (accept("[")) {
        e.kind = Expr::Kind::Index;
        e.kids.push_back(parse_expr());
        expect("]");
      } else {
        e.kind = Expr::Kind::Var;
      }
      type_of(e, t);
      return e;
    }
    fail("expected expression");
  }

  Type type_of(const Expr& e, const Token& where) const {
    auto bad = [&](const std::string& msg) -> Type {
      throw SyntaxError("type error: " + msg, where.line, where.column);
    };
    switch (e.kind) {
      case Expr::Kind::IntLit: return Type::Int;
      case Expr::Kind::BoolLit: return Type::Bool;
      case Expr::Kind::Var: return slot_type(e.slot);
      case Expr::Kind::Index:
        if (slot_type(e.slot) != Type::IntArray) return bad("indexing a non-array");
        if (type_of(e.kids[0], where) != Type::Int) return bad("non-int index");
        return Type::Int;
      case Expr::Kind::Len:
        if (slot_type(e.slot) != Type::IntArray) return bad("len of a non-array");
        return Type::Int;
      case Expr::Kind::ArrayLit:
        for (const auto& k : e.kids)
          if (type_of(k, where) != Type::Int) return bad("non-int array element");
        return Type::IntArray;
      case Expr::Kind::Unary: {
        Type t = type_of(e.kids[0], where);
        if (e.op == "-" && t != Type::Int) return bad("negating a non-int");
        if (e.op == "!" && t != Type::Bool) return bad("'!' on a non-bool");
        return t;
      }
      case Expr::Kind::Binary: {
        Type l = type_of(e.kids[0], where), r = type_of(e.kids[1], where);
        int p = precedence(e.op);
        if (p <= 2) {
          if (l != Type::Bool || r != Type::Bool) return bad("logical op on non-bools");
          return Type::Bool;
        }
        if (p == 3) {
          if (l != r || l == Type::IntArray) return bad("equality on mismatched operands");
          return Type::Bool;
        }
        if (l != Type::Int || r != Type::Int) return bad("arithmetic on non-ints");
        return p == 4 ? Type::Bool : Type::Int;
      }
    }
    return Type::Int;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::unordered_map<std::string, int> slots_;
  std::vector<std::string> names_;
  std::vector<Type> types_;
};

inline void number_statements(std::vector<Stmt>& body, Program& p) {
  for (auto& s : body) {
    s.id = static_cast<int>(p.statements.size());
    Statement info{s.id, s.kind, tokenize_statement(s), -1};
    if (s.kind == StmtKind::If || s.kind == StmtKind::While || s.kind == StmtKind::For) {
      info.branch_site = static_cast<int>(p.branch_sites.size());
      p.branch_sites.push_back({info.branch_site, s.id});
    }
    p.statements.push_back(std::move(info));
    number_statements(s.body, p);
    number_statements(s.else_body, p);
  }
}

}  // namespace detail

/// Parses one minilang function. Statement ids are assigned in pre-order.
inline Program parse(std::string_view source) {
  detail::Parser parser(source);
  Program p = parser.parse_program();
  detail::number_statements(p.body, p);
  p.tokens = lex_texts(p.source());
  return p;
}

// ---------------------------------------------------------------------------
// Interpreter

struct StepLimit {
  std::size_t max_steps = kDefaultStepLimit;
};

struct TraceStep {
  StatementId stmt;
  ProgramState state;
  friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

enum class TraceStatus { Ok, RuntimeError, StepLimitExceeded };

struct ExecutionTrace {
  ProgramState initial_state;
  std::vector<TraceStep> steps;
  Coverage covered_branches;
  Value return_value;
  TraceStatus status = TraceStatus::Ok;
  std::string error;

  bool ok() const { return status == TraceStatus::Ok; }
  const ProgramState& final_state() const {
    return steps.empty() ? initial_state : steps.back().state;
  }
  friend bool operator==(const ExecutionTrace&, const ExecutionTrace&) = default;
};

namespace detail {

struct RuntimeFault {
  std::string what;
};
struct StepLimitHit {};
struct ReturnSignal {};

inline std::int64_t wrap_add(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
inline std::int64_t wrap_sub(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}
inline std::int64_t wrap_mul(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
}

/// Integer arithmetic shared by the interpreter and constant folding.
/// Arithmetic wraps in two's complement; division truncates toward zero.
inline std::optional<std::int64_t> int_binop(const std::string& op, std::int64_t a,
                                             std::int64_t b) {
  if (op == "+") return wrap_add(a, b);
  if (op == "-") return wrap_sub(a, b);
  if (op == "*") return wrap_mul(a, b);
  if (op == "/" || op == "%") {
    if (b == 0) return std::nullopt;
    if (a == std::numeric_limits<std::int64_t>::min() && b == -1)
      return op == "/" ? a : 0;
    return op == "/" ? a / b : a % b;
  }
  return std::nullopt;
}

inline std::optional<bool> compare_op(const std::string& op, std::int64_t a, std::int64_t b) {
  if (op == "<") return a < b;
  if (op == "<=") return a <= b;
  if (op == ">") return a > b;
  if (op == ">=") return a >= b;
  if (op == "==") return a == b;
  if (op == "!=") return a != b;
  return std::nullopt;
}

class Interpreter {
 public:
  Interpreter(const Program& p, StepLimit limit) : prog_(p), limit_(limit) {}

  ExecutionTrace run(const std::vector<Value>& input) {
    ExecutionTrace trace;
    env_.assign(prog_.num_variables(), Value::bottom());
    for (std::size_t i = 0; i < prog_.params.size(); ++i) env_[i] = input[i];
    trace.initial_state.values = env_;
    trace_ = &trace;
    try {
      exec_block(prog_.body);
    } catch (const ReturnSignal&) {
    } catch (const RuntimeFault& f) {
      trace.status = TraceStatus::RuntimeError;
      trace.error = f.what;
    } catch (const StepLimitHit&) {
      trace.status = TraceStatus::StepLimitExceeded;
      trace.error = "step limit exceeded";
    }
    return trace;
  }

 private:
  void record(const Stmt& s) {
    if (trace_->steps.size() >= limit_.max_steps) throw StepLimitHit{};
    trace_->steps.push_back({s.id, ProgramState{env_}});
  }
  void cover(const Stmt& s, bool taken) {
    trace_->covered_branches.insert(
        {prog_.statements[static_cast<std::size_t>(s.id)].branch_site, taken});
  }

  Value eval(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::IntLit: return Value::integer(e.int_value);
      case Expr::Kind::BoolLit: return Value::boolean(e.bool_value);
      case Expr::Kind::Var: return read(e.slot, e.name);
      case Expr::Kind::Index: {
        const Value& arr = read_ref(e.slot, e.name);
        std::int64_t i = eval(e.kids[0]).as_int();
        check_index(arr, i, e.name);
        return Value::integer(arr.as_array()[static_cast<std::size_t>(i)]);
      }
      case Expr::Kind::Len:
        return Value::integer(static_cast<std::int64_t>(read_ref(e.slot, e.name).as_array().size()));
      case Expr::Kind::ArrayLit: {
        Value::Array out;
        for (const auto& k : e.kids) out.push_back(eval(k).as_int());
        return Value::array(std::move(out));
      }
      case Expr::Kind::Unary: {
        Value v = eval(e.kids[0]);
        if (e.op == "-") return Value::integer(wrap_sub(0, v.as_int()));
        return Value::boolean(!v.as_bool());
      }
      case Expr::Kind::Binary: {
        if (e.op == "&&") {
          if (!eval(e.kids[0]).as_bool()) return Value::boolean(false);
          return Value::boolean(eval(e.kids[1]).as_bool());
        }
        if (e.op == "||") {
          if (eval(e.kids[0]).as_bool()) return Value::boolean(true);
          return Value::boolean(eval(e.kids[1]).as_bool());
        }
        Value l = eval(e.kids[0]);
        Value r = eval(e.kids[1]);
        if (l.is_bool()) {
          bool eq = l.as_bool() == r.as_bool();
          return Value::boolean(e.op == "==" ? eq : !eq);
        }
        if (auto c = compare_op(e.op, l.as_int(), r.as_int())) return Value::boolean(*c);
        auto v = int_binop(e.op, l.as_int(), r.as_int());
        if (!v) throw RuntimeFault{"division by zero"};
        return Value::integer(*v);
      }
    }
    throw RuntimeFault{"bad expression"};
  }

  const Value& read_ref(int slot, const std::string& name) const {
    const Value& v = env_[static_cast<std::size_t>(slot)];
    if (v.is_bottom()) throw RuntimeFault{"read of unassigned variable '" + name + "'"};
    return v;
  }
  Value read(int slot, const std::string& name) const { return read_ref(slot, name); }

  static void check_index(const Value& arr, std::int64_t i, const std::string& name) {
    if (i < 0 || static_cast<std::size_t>(i) >= arr.as_array().size())
      throw RuntimeFault{"index " + std::to_string(i) + " out of bounds for '" + name + "'"};
  }

  std::int64_t apply_compound(const std::string& op, std::int64_t cur, std::int64_t rhs) {
    auto v = int_binop(op.substr(0, 1), cur, rhs);
    if (!v) throw RuntimeFault{"division by zero"};
    return *v;
  }

  void exec_block(const std::vector<Stmt>& body) {
    for (const auto& s : body) exec(s);
  }

  void exec(const Stmt& s) {
    switch (s.kind) {
      case StmtKind::Assign: {
        Value v = eval(*s.value);
        auto& slot = env_[static_cast<std::size_t>(s.slot)];
        if (s.op == "=") {
          slot = std::move(v);
        } else {
          std::int64_t cur = read(s.slot, s.target).as_int();
          slot = Value::integer(apply_compound(s.op, cur, v.as_int()));
        }
        record(s);
        return;
      }
      case StmtKind::ArrayStore: {
        std::int64_t i = eval(*s.index).as_int();
        std::int64_t v = eval(*s.value).as_int();
        read_ref(s.slot, s.target);
        auto& arr = env_[static_cast<std::size_t>(s.slot)];
        check_index(arr, i, s.target);
        auto& cell = arr.as_array()[static_cast<std::size_t>(i)];
        cell = s.op == "=" ? v : apply_compound(s.op, cell, v);
        record(s);
        return;
      }
      case StmtKind::Call: {
        std::int64_t i = eval(s.args[1]).as_int();
        std::int64_t j = eval(s.args[2]).as_int();
        const auto& name = s.args[0].name;
        read_ref(s.args[0].slot, name);
        auto& arr = env_[static_cast<std::size_t>(s.args[0].slot)];
        check_index(arr, i, name);
        check_index(arr, j, name);
        std::swap(arr.as_array()[static_cast<std::size_t>(i)],
                  arr.as_array()[static_cast<std::size_t>(j)]);
        record(s);
        return;
      }
      case StmtKind::Return:
        if (s.value) trace_->return_value = eval(*s.value);
        record(s);
        throw ReturnSignal{};
      case StmtKind::If: {
        bool c = eval(*s.value).as_bool();
        record(s);
        cover(s, c);
        if (c) exec_block(s.body);
        else exec_block(s.else_body);
        return;
      }
      case StmtKind::While:
        while (true) {
          bool c = eval(*s.value).as_bool();
          record(s);
          cover(s, c);
          if (!c) return;
          exec_block(s.body);
        }
      case StmtKind::For: {
        std::int64_t lo = eval(*s.lo).as_int();
        std::int64_t hi = eval(*s.hi).as_int();
        auto& var = env_[static_cast<std::size_t>(s.slot)];
        var = Value::integer(lo);
        while (true) {
          bool c = env_[static_cast<std::size_t>(s.slot)].as_int() < hi;
          record(s);
          cover(s, c);
          if (!c) return;
          exec_block(s.body);
          auto& iv = env_[static_cast<std::size_t>(s.slot)];
          if (!iv.is_int()) throw RuntimeFault{"loop variable clobbered"};
          iv = Value::integer(wrap_add(iv.as_int(), 1));
        }
      }
    }
  }

  const Program& prog_;
  StepLimit limit_;
  std::vector<Value> env_;
  ExecutionTrace* trace_ = nullptr;
};

inline bool value_has_type(const Value& v, Type t) {
  switch (t) {
    case Type::Int: return v.is_int();
    case Type::Bool: return v.is_bool();
    case Type::IntArray: return v.is_array() && v.as_array().size() <= kDefaultMaxArrayLength;
  }
  return false;
}

}  // namespace detail

/// Runs `p` on `input`, recording the state after every executed statement.
inline ExecutionTrace execute(const Program& p, const std::vector<Value>& input,
                              StepLimit limits = {}) {
  if (limits.max_steps == 0) throw Error("step limit must be positive");
  if (input.size() != p.params.size())
    throw Error("arity mismatch: expected " + std::to_string(p.params.size()) + " inputs, got " +
                std::to_string(input.size()));
  for (std::size_t i = 0; i < input.size(); ++i)
    if (!detail::value_has_type(input[i], p.params[i].type))
      throw Error("input " + std::to_string(i) + " does not match parameter type " +
                  type_name(p.params[i].type));
  return detail::Interpreter(p, limits).run(input);
}

struct InputSpec {
  std::int64_t int_min = -50;
  std::int64_t int_max = 50;
  std::size_t array_min_length = 1;
  std::size_t array_max_length = kDefaultMaxArrayLength;
};

inline std::vector<Value> random_input(const Program& p, Rng& rng, const InputSpec& spec) {
  std::uniform_int_distribution<std::int64_t> ints(spec.int_min, spec.int_max);
  std::uniform_int_distribution<std::size_t> lens(spec.array_min_length, spec.array_max_length);
  std::bernoulli_distribution coin(0.5);
  std::vector<Value> out;
  for (const auto& prm : p.params) {
    switch (prm.type) {
      case Type::Int: out.push_back(Value::integer(ints(rng))); break;
      case Type::Bool: out.push_back(Value::boolean(coin(rng))); break;
      case Type::IntArray: {
        Value::Array a(lens(rng));
        for (auto& x : a) x = ints(rng);
        out.push_back(Value::array(std::move(a)));
        break;
      }
    }
  }
  return out;
}

/// `n` input tuples drawn from the per-type distributions in `spec`.
inline std::vector<std::vector<Value>> random_inputs(const Program& p, std::size_t n,
                                                     std::uint64_t seed,
                                                     const InputSpec& spec = {}) {
  if (n == 0) throw Error("random_inputs: n must be at least 1");
  if (spec.int_min > spec.int_max || spec.array_min_length > spec.array_max_length ||
      spec.array_max_length > kDefaultMaxArrayLength)
    throw Error("random_inputs: invalid input spec");
  Rng rng(seed);
  std::vector<std::vector<Value>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_input(p, rng, spec));
  return out;
}

inline Coverage branch_coverage(const std::vector<ExecutionTrace>& traces) {
  Coverage out;
  for (const auto& t : traces) out.insert(t.covered_branches.begin(), t.covered_branches.end());
  return out;
}

// ---------------------------------------------------------------------------
// Trace files (line-delimited JSON)

inline nlohmann::json state_to_json(const ProgramState& s) {
  auto out = nlohmann::json::array();
  for (const auto& v : s.values) out.push_back(value_to_json(v));
  return out;
}

inline ProgramState state_from_json(const nlohmann::json& j) {
  ProgramState s;
  for (const auto& v : j) s.values.push_back(value_from_json(v));
  return s;
}

inline nlohmann::json branch_to_json(const BranchArm& b) {
  return nlohmann::json::array({b.site, b.taken ? "T" : "F"});
}

inline BranchArm branch_from_json(const nlohmann::json& j) {
  return {j.at(0).get<int>(), j.at(1).get<std::string>() == "T"};
}

inline nlohmann::json trace_to_json(const std::string& program_id, const std::vector<Value>& input,
                                    const ExecutionTrace& t) {
  nlohmann::json j;
  j["program_id"] = program_id;
  auto in = nlohmann::json::array();
  for (const auto& v : input) in.push_back(value_to_json(v));
  j["input"] = in;
  auto steps = nlohmann::json::array();
  for (const auto& s : t.steps) steps.push_back({{"stmt_id", s.stmt}, {"state", state_to_json(s.state)}});
  j["steps"] = steps;
  auto br = nlohmann::json::array();
  for (const auto& b : t.covered_branches) br.push_back(branch_to_json(b));
  j["branches"] = br;
  j["status"] = t.status == TraceStatus::Ok ? "ok"
                : t.status == TraceStatus::RuntimeError ? "runtime_error"
                                                        : "step_limit";
  if (!t.return_value.is_bottom()) j["return"] = value_to_json(t.return_value);
  return j;
}

struct TraceRecord {
  std::string program_id;
  std::vector<Value> input;
  ExecutionTrace trace;
};

inline TraceRecord trace_from_json(const nlohmann::json& j) {
  TraceRecord r;
  r.program_id = j.at("program_id").get<std::string>();
  for (const auto& v : j.at("input")) r.input.push_back(value_from_json(v));
  for (const auto& s : j.at("steps"))
    r.trace.steps.push_back({s.at("stmt_id").get<int>(), state_from_json(s.at("state"))});
  for (const auto& b : j.at("branches")) r.trace.covered_branches.insert(branch_from_json(b));
  std::string status = j.value("status", "ok");
  r.trace.status = status == "ok"              ? TraceStatus::Ok
                   : status == "runtime_error" ? TraceStatus::RuntimeError
                                               : TraceStatus::StepLimitExceeded;
  if (j.contains("return")) r.trace.return_value = value_from_json(j["return"]);
  return r;
}

}  // namespace ligerlab::minilang

#endif  // LIGERLAB_MINILANG_HPP
