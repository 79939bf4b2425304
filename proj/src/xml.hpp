#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kbmod::xml {

using Attributes = std::vector<std::pair<std::string_view, std::string_view>>;

std::string_view find_attribute(const Attributes& attrs, std::string_view key);

// SAX-style callbacks. Exceptions thrown from a callback abort the parse and
// propagate out of parse().
class Handler {
 public:
  virtual ~Handler() = default;
  virtual void start_element(std::string_view name, const Attributes& attrs) = 0;
  virtual void end_element(std::string_view name) = 0;
  virtual void characters(std::string_view) {}
};

// Streams `in` through expat. Malformed XML throws ParseError with line/column.
void parse(std::istream& in, Handler& handler);

// Position of the parser during the current callback (1-based).
std::pair<std::size_t, std::size_t> current_position();

struct Node {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<Node> children;
  std::string text;
  std::size_t line = 0;

  const std::string* attribute(std::string_view key) const;
  const Node* child(std::string_view child_name) const;
  std::vector<const Node*> children_named(std::string_view child_name) const;
  // Text of <child><text>...</text></child>, the usual PNML idiom.
  std::string child_text(std::string_view child_name) const;
};

Node parse_document(std::istream& in);

std::string escape(std::string_view raw);

}  // namespace kbmod::xml
