#include <sstream>
#include <string>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "bpsim/errors.hpp"
#include "bpsim/process_model.hpp"

namespace bpsim {
namespace {

namespace pt = boost::property_tree;

std::string local_name(const std::string& tag) {
  const auto colon = tag.rfind(':');
  return colon == std::string::npos ? tag : tag.substr(colon + 1);
}

std::string attribute(const pt::ptree& element, const char* name) {
  if (auto attrs = element.get_child_optional("<xmlattr>")) {
    return attrs->get<std::string>(name, "");
  }
  return {};
}

bool is_task_kind(const std::string& kind) {
  return kind == "task" || kind == "userTask" || kind == "serviceTask" ||
         kind == "manualTask" || kind == "scriptTask" || kind == "sendTask" ||
         kind == "receiveTask" || kind == "businessRuleTask";
}

// Children that may appear inside flow elements without changing semantics.
bool is_annotation(const std::string& kind) {
  return kind == "<xmlattr>" || kind == "<xmlcomment>" || kind == "documentation" ||
         kind == "extensionElements" || kind == "incoming" || kind == "outgoing" ||
         kind == "conditionExpression" || kind == "timerEventDefinition" ||
         kind == "text" || kind == "textAnnotation" || kind == "association";
}

void check_children(const pt::ptree& element, const std::string& owner) {
  for (const auto& [tag, child] : element) {
    const std::string kind = local_name(tag);
    if (is_annotation(kind)) continue;
    throw ValidationError("unsupported element '" + kind + "' inside '" + owner + "'");
  }
}

const pt::ptree* find_process(const pt::ptree& root) {
  const pt::ptree* definitions = nullptr;
  for (const auto& [tag, child] : root) {
    if (local_name(tag) == "definitions") definitions = &child;
  }
  if (definitions == nullptr) throw ValidationError("BPMN document has no <definitions> root");
  const pt::ptree* process = nullptr;
  for (const auto& [tag, child] : *definitions) {
    const std::string kind = local_name(tag);
    if (kind == "process") {
      if (process != nullptr) throw ValidationError("BPMN document declares several processes");
      process = &child;
    } else if (kind == "collaboration") {
      for (const auto& [ctag, cchild] : child) {
        if (local_name(ctag) == "messageFlow") {
          throw ValidationError("unsupported element 'messageFlow'");
        }
      }
    }
  }
  if (process == nullptr) throw ValidationError("BPMN document has no <process>");
  return process;
}

}  // namespace

WFGraph parse_bpmn(std::string_view xml_document) {
  pt::ptree root;
  try {
    std::istringstream in{std::string(xml_document)};
    pt::read_xml(in, root, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw ValidationError(std::string("malformed BPMN XML: ") + e.what());
  }

  const pt::ptree* process = find_process(root);
  GraphSpec spec;
  int starts = 0;
  int ends = 0;
  for (const auto& [tag, element] : *process) {
    const std::string kind = local_name(tag);
    if (is_annotation(kind)) continue;
    const std::string id = attribute(element, "id");
    const std::string name = attribute(element, "name");
    if (id.empty()) throw ValidationError("element '" + kind + "' without id");

    if (kind == "sequenceFlow") {
      check_children(element, id);
      spec.flows.push_back({id, attribute(element, "sourceRef"), attribute(element, "targetRef")});
      continue;
    }

    NodeType type;
    if (kind == "startEvent") {
      type = NodeType::Start;
      ++starts;
    } else if (kind == "endEvent") {
      type = NodeType::Sink;
      ++ends;
    } else if (is_task_kind(kind)) {
      type = NodeType::Task;
    } else if (kind == "intermediateCatchEvent") {
      type = NodeType::Event;
    } else if (kind == "exclusiveGateway") {
      type = NodeType::Xor;
    } else if (kind == "parallelGateway") {
      type = NodeType::And;
    } else {
      throw ValidationError("unsupported element '" + kind + "' (id '" + id + "')");
    }
    check_children(element, id);
    spec.nodes.push_back({id, name, type});
  }
  if (starts > 1) throw ValidationError("multiple start events");
  if (ends > 1) throw ValidationError("multiple end events");
  return WFGraph(spec);
}

}  // namespace bpsim
