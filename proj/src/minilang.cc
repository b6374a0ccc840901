// Copyright 2026 The selfdistill Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "selfdistill/minilang.h"

#include <algorithm>
#include <unordered_map>

namespace selfdistill::minilang {

LexError::LexError(std::size_t offset, char c)
    : DataError("lexical error at offset " + std::to_string(offset) +
                ": unexpected character '" + std::string(1, c) + "'"),
      offset_(offset) {}

ParseError::ParseError(std::size_t position, const std::string& message)
    : DataError("parse error at token " + std::to_string(position) + ": " + message),
      position_(position) {}

namespace {

bool is_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
bool is_symbol(char c) {
  switch (c) {
    case '=': case ';': case '(': case ')': case '{': case '}':
    case '+': case '-': case '*': case '/': case '<': case '>':
      return true;
    default:
      return false;
  }
}
bool is_keyword(std::string_view t) { return t == "if" || t == "return"; }
bool is_operator(std::string_view t) {
  return t.size() == 1 && (t[0] == '+' || t[0] == '-' || t[0] == '*' ||
                           t[0] == '/' || t[0] == '<' || t[0] == '>');
}

std::string describe(std::span<const std::string> tokens, std::size_t pos) {
  return pos < tokens.size() ? "'" + tokens[pos] + "'" : "end of input";
}

class Parser {
 public:
  explicit Parser(std::span<const std::string> tokens) : tokens_(tokens) {}

  AstNode program() {
    if (tokens_.empty()) throw ParseError(0, "empty program");
    AstNode prog{NodeKind::kProgram, "", {}, 0};
    while (pos_ < tokens_.size()) prog.children.push_back(statement());
    return prog;
  }

 private:
  bool at(std::string_view t) const { return pos_ < tokens_.size() && tokens_[pos_] == t; }

  void expect(std::string_view t) {
    if (!at(t)) {
      throw ParseError(pos_, "expected '" + std::string(t) + "', found " +
                                 describe(tokens_, pos_));
    }
    ++pos_;
  }

  AstNode statement() {
    if (at("return")) {
      ++pos_;
      AstNode node{NodeKind::kReturn, "", {expression()}, 0};
      expect(";");
      return node;
    }
    if (at("if")) {
      ++pos_;
      expect("(");
      AstNode cond = expression();
      expect(")");
      expect("{");
      AstNode body{NodeKind::kProgram, "", {}, 0};
      do {
        body.children.push_back(statement());
      } while (pos_ < tokens_.size() && !at("}"));
      expect("}");
      return AstNode{NodeKind::kIf, "", {std::move(cond), std::move(body)}, 0};
    }
    if (pos_ < tokens_.size() && is_identifier(tokens_[pos_])) {
      AstNode target{NodeKind::kIdentifier, tokens_[pos_], {}, pos_};
      ++pos_;
      expect("=");
      AstNode value = expression();
      expect(";");
      return AstNode{NodeKind::kAssign, "", {std::move(target), std::move(value)}, 0};
    }
    throw ParseError(pos_, "expected statement (identifier, 'return' or 'if'), found " +
                               describe(tokens_, pos_));
  }

  AstNode expression() {
    AstNode lhs = term();
    while (pos_ < tokens_.size() && is_operator(tokens_[pos_])) {
      std::string op = tokens_[pos_++];
      AstNode rhs = term();
      lhs = AstNode{NodeKind::kBinaryOp, std::move(op), {std::move(lhs), std::move(rhs)}, 0};
    }
    return lhs;
  }

  AstNode term() {
    if (pos_ < tokens_.size()) {
      const std::string& t = tokens_[pos_];
      if (is_identifier(t)) return AstNode{NodeKind::kIdentifier, t, {}, pos_++};
      if (is_number(t)) return AstNode{NodeKind::kNumber, t, {}, pos_++};
      if (t == "(") {
        ++pos_;
        AstNode inner = expression();
        expect(")");
        return inner;
      }
    }
    throw ParseError(pos_, "expected expression (identifier, number or '('), found " +
                               describe(tokens_, pos_));
  }

  std::span<const std::string> tokens_;
  std::size_t pos_ = 0;
};

void print_expr(const AstNode& e, std::string& out) {
  if (e.kind != NodeKind::kBinaryOp) {
    out += e.label;
    return;
  }
  print_expr(e.children[0], out);
  out += ' ';
  out += e.label;
  out += ' ';
  // Left associativity: only a right-nested operator needs parentheses.
  if (e.children[1].kind == NodeKind::kBinaryOp) {
    out += "( ";
    print_expr(e.children[1], out);
    out += " )";
  } else {
    print_expr(e.children[1], out);
  }
}

void print_stmts(const AstNode& prog, std::string& out) {
  for (const AstNode& s : prog.children) {
    if (!out.empty()) out += ' ';
    switch (s.kind) {
      case NodeKind::kAssign:
        out += s.children[0].label + " = ";
        print_expr(s.children[1], out);
        out += " ;";
        break;
      case NodeKind::kReturn:
        out += "return ";
        print_expr(s.children[0], out);
        out += " ;";
        break;
      case NodeKind::kIf:
        out += "if ( ";
        print_expr(s.children[0], out);
        out += " ) {";
        print_stmts(s.children[1], out);
        out += " }";
        break;
      default:
        break;
    }
  }
}

std::string child_label(const AstNode& c) {
  if (c.kind == NodeKind::kIdentifier) return "ID";
  if (c.kind == NodeKind::kNumber) return "NUM";
  return std::string(to_string(c.kind));
}

void collect_subtrees(const AstNode& n, SubtreeCounts& out) {
  if (n.is_leaf()) return;
  std::string s(to_string(n.kind));
  s += '(';
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    if (i) s += ',';
    s += child_label(n.children[i]);
  }
  s += ')';
  ++out[s];
  for (const AstNode& c : n.children) collect_subtrees(c, out);
}

using Env = std::unordered_map<std::string, std::size_t>;

void collect_uses(const AstNode& e, const Env& env, std::vector<DataflowEdge>& out) {
  if (e.kind == NodeKind::kIdentifier) {
    auto it = env.find(e.label);
    if (it != env.end()) out.push_back({e.position, it->second, e.label});
    return;
  }
  for (const AstNode& c : e.children) collect_uses(c, env, out);
}

void walk_statements(const AstNode& prog, Env& env, std::vector<DataflowEdge>& out) {
  for (const AstNode& s : prog.children) {
    switch (s.kind) {
      case NodeKind::kAssign:
        collect_uses(s.children[1], env, out);
        env[s.children[0].label] = s.children[0].position;
        break;
      case NodeKind::kReturn:
        collect_uses(s.children[0], env, out);
        break;
      case NodeKind::kIf:
        collect_uses(s.children[0], env, out);
        walk_statements(s.children[1], env, out);
        break;
      default:
        break;
    }
  }
}

}  // namespace

bool is_identifier(std::string_view token) {
  if (token.empty() || !is_alpha(token[0]) || is_keyword(token)) return false;
  return std::all_of(token.begin(), token.end(),
                     [](char c) { return is_alpha(c) || is_digit(c); });
}

bool is_number(std::string_view token) {
  return !token.empty() && std::all_of(token.begin(), token.end(), is_digit);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (is_space(c)) {
      ++i;
    } else if (is_alpha(c)) {
      std::size_t j = i + 1;
      while (j < text.size() && (is_alpha(text[j]) || is_digit(text[j]))) ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j;
    } else if (is_digit(c)) {
      std::size_t j = i + 1;
      while (j < text.size() && is_digit(text[j])) ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j;
    } else if (is_symbol(c)) {
      out.emplace_back(1, c);
      ++i;
    } else {
      throw LexError(i, c);
    }
  }
  return out;
}

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::kProgram: return "Program";
    case NodeKind::kAssign: return "Assign";
    case NodeKind::kReturn: return "Return";
    case NodeKind::kIf: return "If";
    case NodeKind::kBinaryOp: return "BinaryOp";
    case NodeKind::kIdentifier: return "Identifier";
    case NodeKind::kNumber: return "Number";
  }
  return "?";
}

AstNode parse(std::span<const std::string> tokens) { return Parser(tokens).program(); }

AstNode parse_source(std::string_view text) {
  const auto tokens = tokenize(text);
  return parse(tokens);
}

std::string pretty_print(const AstNode& ast) {
  std::string out;
  print_stmts(ast, out);
  return out;
}

SubtreeCounts subtrees(const AstNode& ast) {
  SubtreeCounts out;
  collect_subtrees(ast, out);
  return out;
}

std::vector<DataflowEdge> dataflow_edges(const AstNode& ast) {
  std::vector<DataflowEdge> out;
  Env env;
  walk_statements(ast, env, out);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.use_position < b.use_position;
  });
  return out;
}

}  // namespace selfdistill::minilang
