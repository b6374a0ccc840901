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

#ifndef SELFDISTILL_MINILANG_H_
#define SELFDISTILL_MINILANG_H_

// A tiny imperative language used as the code side of the synthetic tasks and
// as the structural signal for CodeBLEU's syntax and dataflow components.
//
//   program := stmt+
//   stmt    := ident "=" expr ";" | "return" expr ";"
//            | "if" "(" expr ")" "{" stmt+ "}"
//   expr    := term (op term)*          all ops share one precedence, left-assoc
//   term    := ident | number | "(" expr ")"
//   op      := "+" | "-" | "*" | "/" | "<" | ">"

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selfdistill/error.h"

namespace selfdistill::minilang {

class LexError : public DataError {
 public:
  LexError(std::size_t offset, char c);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t position, const std::string& message);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Exported for the keyword-weighted n-gram component.
inline const std::vector<std::string>& keywords() {
  static const std::vector<std::string> kKeywords = {"if", "return"};
  return kKeywords;
}

bool is_identifier(std::string_view token);
bool is_number(std::string_view token);

// Maximal munch; whitespace separates tokens and is dropped.
std::vector<std::string> tokenize(std::string_view text);

enum class NodeKind { kProgram, kAssign, kReturn, kIf, kBinaryOp, kIdentifier, kNumber };

std::string_view to_string(NodeKind kind);

struct AstNode {
  NodeKind kind = NodeKind::kProgram;
  std::string label;  // operator, identifier name or numeral
  std::vector<AstNode> children;
  std::size_t position = 0;  // token index of Identifier/Number leaves

  bool is_leaf() const {
    return kind == NodeKind::kIdentifier || kind == NodeKind::kNumber;
  }

  // Structural equality; source positions are provenance and not compared.
  friend bool operator==(const AstNode& a, const AstNode& b) {
    return a.kind == b.kind && a.label == b.label && a.children == b.children;
  }
};

AstNode parse(std::span<const std::string> tokens);
AstNode parse_source(std::string_view text);

// Canonical single-space rendering; parse(tokenize(pretty_print(ast))) == ast.
std::string pretty_print(const AstNode& ast);

// Multiset of "Kind(ChildKind,...)" strings, one per internal node, with
// Identifier leaves written as ID and Number leaves as NUM.
using SubtreeCounts = std::map<std::string, std::size_t>;
SubtreeCounts subtrees(const AstNode& ast);

struct DataflowEdge {
  std::size_t use_position = 0;
  std::size_t def_position = 0;
  std::string variable;

  friend bool operator==(const DataflowEdge&, const DataflowEdge&) = default;
};

// Each identifier use binds to the most recent prior assignment of that name
// in statement order. Definitions inside an if-body stay visible after it.
std::vector<DataflowEdge> dataflow_edges(const AstNode& ast);

}  // namespace selfdistill::minilang

#endif  // SELFDISTILL_MINILANG_H_
