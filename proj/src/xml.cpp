#include "xml.hpp"

#include <expat.h>

#include <array>
#include <exception>
#include <istream>
#include <memory>

#include "kbmod/error.hpp"

namespace kbmod::xml {
namespace {

thread_local XML_Parser g_active = nullptr;

struct Context {
  Handler* handler;
  XML_Parser parser;
  std::exception_ptr error;
};

void abort_with(Context* ctx) {
  ctx->error = std::current_exception();
  XML_StopParser(ctx->parser, XML_FALSE);
}

void on_start(void* data, const XML_Char* name, const XML_Char** atts) {
  auto* ctx = static_cast<Context*>(data);
  if (ctx->error) return;
  try {
    Attributes attrs;
    for (int i = 0; atts[i] != nullptr; i += 2) attrs.emplace_back(atts[i], atts[i + 1]);
    ctx->handler->start_element(name, attrs);
  } catch (...) {
    abort_with(ctx);
  }
}

void on_end(void* data, const XML_Char* name) {
  auto* ctx = static_cast<Context*>(data);
  if (ctx->error) return;
  try {
    ctx->handler->end_element(name);
  } catch (...) {
    abort_with(ctx);
  }
}

void on_text(void* data, const XML_Char* s, int len) {
  auto* ctx = static_cast<Context*>(data);
  if (ctx->error) return;
  try {
    ctx->handler->characters(std::string_view(s, static_cast<std::size_t>(len)));
  } catch (...) {
    abort_with(ctx);
  }
}

struct ParserDeleter {
  void operator()(XML_ParserStruct* p) const { XML_ParserFree(p); }
};

class DomBuilder : public Handler {
 public:
  void start_element(std::string_view name, const Attributes& attrs) override {
    Node node;
    node.name = std::string(name);
    node.line = current_position().first;
    for (const auto& [k, v] : attrs) node.attributes.emplace_back(std::string(k), std::string(v));
    stack_.push_back(std::move(node));
  }
  void end_element(std::string_view) override {
    Node node = std::move(stack_.back());
    stack_.pop_back();
    if (stack_.empty()) {
      root_ = std::move(node);
      done_ = true;
    } else {
      stack_.back().children.push_back(std::move(node));
    }
  }
  void characters(std::string_view text) override {
    if (!stack_.empty()) stack_.back().text.append(text);
  }

  Node take() {
    if (!done_) throw ParseError("XML document has no root element");
    return std::move(root_);
  }

 private:
  std::vector<Node> stack_;
  Node root_;
  bool done_ = false;
};

}  // namespace

std::string_view find_attribute(const Attributes& attrs, std::string_view key) {
  for (const auto& [k, v] : attrs)
    if (k == key) return v;
  return {};
}

std::pair<std::size_t, std::size_t> current_position() {
  if (g_active == nullptr) return {0, 0};
  return {static_cast<std::size_t>(XML_GetCurrentLineNumber(g_active)),
          static_cast<std::size_t>(XML_GetCurrentColumnNumber(g_active)) + 1};
}

void parse(std::istream& in, Handler& handler) {
  std::unique_ptr<XML_ParserStruct, ParserDeleter> parser(XML_ParserCreate(nullptr));
  if (!parser) throw std::bad_alloc();
  Context ctx{&handler, parser.get(), nullptr};
  XML_SetUserData(parser.get(), &ctx);
  XML_SetElementHandler(parser.get(), on_start, on_end);
  XML_SetCharacterDataHandler(parser.get(), on_text);

  XML_Parser previous = g_active;
  g_active = parser.get();
  struct Restore {
    XML_Parser prev;
    ~Restore() { g_active = prev; }
  } restore{previous};

  std::array<char, 1 << 16> buffer{};
  bool final_chunk = false;
  while (!final_chunk) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    const auto got = in.gcount();
    final_chunk = got < static_cast<std::streamsize>(buffer.size());
    if (XML_Parse(parser.get(), buffer.data(), static_cast<int>(got), final_chunk ? XML_TRUE : XML_FALSE) ==
        XML_STATUS_ERROR) {
      if (ctx.error) std::rethrow_exception(ctx.error);
      throw ParseError(std::string("malformed XML: ") + XML_ErrorString(XML_GetErrorCode(parser.get())),
                       static_cast<std::size_t>(XML_GetCurrentLineNumber(parser.get())),
                       static_cast<std::size_t>(XML_GetCurrentColumnNumber(parser.get())) + 1);
    }
    if (ctx.error) std::rethrow_exception(ctx.error);
  }
}

const std::string* Node::attribute(std::string_view key) const {
  for (const auto& [k, v] : attributes)
    if (k == key) return &v;
  return nullptr;
}

const Node* Node::child(std::string_view child_name) const {
  for (const auto& c : children)
    if (c.name == child_name) return &c;
  return nullptr;
}

std::vector<const Node*> Node::children_named(std::string_view child_name) const {
  std::vector<const Node*> out;
  for (const auto& c : children)
    if (c.name == child_name) out.push_back(&c);
  return out;
}

std::string Node::child_text(std::string_view child_name) const {
  const Node* c = child(child_name);
  if (c == nullptr) return {};
  const Node* t = c->child("text");
  return t != nullptr ? t->text : std::string{};
}

Node parse_document(std::istream& in) {
  DomBuilder builder;
  parse(in, builder);
  return builder.take();
}

std::string escape(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char ch : raw) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace kbmod::xml
