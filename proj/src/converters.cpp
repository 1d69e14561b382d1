#include "hpoviz/converters.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hpoviz/errors.hpp"

namespace hpoviz {

namespace {

using OrderedJson = nlohmann::ordered_json;

constexpr const char* kAllFiles[] = {kMetaFile, kSpaceFile, kConfigsFile, kTrialsFile};

[[noreturn]] void schema_error(const std::string& file, std::size_t line, const std::string& field,
                               const std::string& message) {
  std::string where = file;
  if (line > 0) where += ":" + std::to_string(line);
  throw Error(ErrorCode::Schema, where + ": field '" + field + "': " + message, field);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << bytes;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

Json parse_json(const std::string& text, const std::string& file, std::size_t line = 0) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    schema_error(file, line, "<json>", e.what());
  }
}

// Context for field access with file/line in error messages.
struct Ctx {
  std::string file;
  std::size_t line = 0;

  const Json& require(const Json& obj, const char* field) const {
    if (!obj.is_object()) schema_error(file, line, field, "expected an object");
    auto it = obj.find(field);
    if (it == obj.end()) schema_error(file, line, field, "missing");
    return *it;
  }
  std::string string(const Json& obj, const char* field) const {
    const Json& v = require(obj, field);
    if (!v.is_string()) schema_error(file, line, field, "expected a string");
    return v.get<std::string>();
  }
  double number(const Json& obj, const char* field) const {
    const Json& v = require(obj, field);
    if (!v.is_number()) schema_error(file, line, field, "expected a number");
    return v.get<double>();
  }
  std::optional<double> nullable_number(const Json& obj, const char* field) const {
    auto it = obj.find(field);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) schema_error(file, line, field, "expected a number or null");
    return it->get<double>();
  }
};

HpValue value_from_json(const Json& v, const Ctx& ctx, const char* field) {
  if (v.is_number_integer()) return HpValue(v.get<std::int64_t>());
  if (v.is_number()) return HpValue(v.get<double>());
  if (v.is_string()) return HpValue(v.get<std::string>());
  if (v.is_boolean()) return HpValue(std::string(v.get<bool>() ? "true" : "false"));
  schema_error(ctx.file, ctx.line, field, "expected a number or string");
}

ConfigurationSpace parse_space(const Json& doc) {
  Ctx ctx{kSpaceFile};
  const Json& list = ctx.require(doc, "hyperparameters");
  if (!list.is_array()) schema_error(kSpaceFile, 0, "hyperparameters", "expected an array");
  ConfigurationSpace space;
  for (const Json& item : list) {
    Hyperparameter hp;
    hp.name = ctx.string(item, "name");
    auto kind = parse_hp_kind(ctx.string(item, "type"));
    if (!kind) schema_error(kSpaceFile, 0, "type", "unknown type for '" + hp.name + "'");
    hp.kind = *kind;
    if (hp.is_numeric()) {
      hp.lower = ctx.number(item, "lower");
      hp.upper = ctx.number(item, "upper");
      if (auto it = item.find("log"); it != item.end() && !it->is_null()) {
        if (!it->is_boolean()) schema_error(kSpaceFile, 0, "log", "expected a boolean");
        hp.log_scale = it->get<bool>();
      }
    }
    if (hp.has_choices()) {
      const Json& choices = ctx.require(item, "choices");
      if (!choices.is_array()) schema_error(kSpaceFile, 0, "choices", "expected an array");
      for (const Json& c : choices) {
        if (!c.is_string()) schema_error(kSpaceFile, 0, "choices", "expected strings");
        hp.choices.push_back(c.get<std::string>());
      }
    }
    HpValue def = value_from_json(ctx.require(item, "default"), ctx, "default");
    if (hp.kind == HpKind::Constant) {
      hp.default_value = def;
    } else {
      auto coerced = coerce_value(hp, def);
      if (!coerced) schema_error(kSpaceFile, 0, "default", "wrong type for '" + hp.name + "'");
      hp.default_value = *coerced;
    }
    if (auto it = item.find("condition"); it != item.end() && !it->is_null()) {
      Condition cond;
      cond.parent = ctx.string(*it, "parent");
      const Json& values = ctx.require(*it, "values");
      if (!values.is_array()) schema_error(kSpaceFile, 0, "values", "expected an array");
      for (const Json& v : values) cond.active_when.push_back(value_from_json(v, ctx, "values"));
      hp.condition = std::move(cond);
    }
    space.hyperparameters.push_back(std::move(hp));
  }
  // Condition values take the parent's canonical type.
  for (auto& hp : space.hyperparameters) {
    if (!hp.condition) continue;
    auto parent = space.index_of(hp.condition->parent);
    if (!parent) continue;
    for (auto& v : hp.condition->active_when) {
      if (auto c = coerce_value(space.at(*parent), v)) v = *c;
    }
  }
  return space;
}

Config parse_config(const ConfigurationSpace& space, const Json& obj, const std::string& id) {
  Ctx ctx{kConfigsFile};
  if (!obj.is_object()) schema_error(kConfigsFile, 0, id, "expected an object");
  Config cfg;
  for (const auto& [name, v] : obj.items()) {
    HpValue value = value_from_json(v, ctx, name.c_str());
    if (auto idx = space.index_of(name)) {
      if (auto c = coerce_value(space.at(*idx), value)) value = *c;
    }
    cfg.emplace(name, std::move(value));
  }
  return cfg;
}

Trial parse_trial(const Json& obj, const Run& run, const Ctx& ctx) {
  Trial t;
  t.config_id = ctx.string(obj, "config_id");
  t.budget = ctx.number(obj, "budget");
  const Json& seed = ctx.require(obj, "seed");
  if (!seed.is_null()) {
    if (!seed.is_number_integer()) schema_error(ctx.file, ctx.line, "seed", "expected an integer or null");
    t.seed = seed.get<std::int64_t>();
  }
  const Json& objs = ctx.require(obj, "objectives");
  if (!objs.is_object()) schema_error(ctx.file, ctx.line, "objectives", "expected an object");
  for (const auto& o : run.objectives) t.objectives[o.name] = std::nullopt;
  for (const auto& [name, v] : objs.items()) {
    if (v.is_null()) {
      t.objectives[name] = std::nullopt;
    } else if (v.is_number()) {
      t.objectives[name] = v.get<double>();
    } else {
      schema_error(ctx.file, ctx.line, "objectives", "value of '" + name + "' must be a number or null");
    }
  }
  auto status = parse_status(ctx.string(obj, "status"));
  if (!status) schema_error(ctx.file, ctx.line, "status", "unknown status");
  t.status = *status;
  t.start_time = ctx.number(obj, "start");
  ctx.require(obj, "end");
  t.end_time = ctx.nullable_number(obj, "end");
  return t;
}

// Parses complete lines of trials.jsonl. Blank lines are skipped.
void parse_trial_lines(std::string_view text, std::size_t first_line, Run& run) {
  std::size_t line_no = first_line;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    Ctx ctx{kTrialsFile, line_no};
    Json obj = parse_json(std::string(line), kTrialsFile, line_no);
    run.trials.push_back(parse_trial(obj, run, ctx));
  }
}

std::size_t count_lines(std::string_view text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) +
         (!text.empty() && text.back() != '\n' ? 1 : 0);
}

Run parse_header(const fs::path& path) {
  Run run;
  Json meta = parse_json(read_file(path / kMetaFile), kMetaFile);
  Ctx ctx{kMetaFile};
  run.name = ctx.string(meta, "name");
  run.meta["optimizer"] = ctx.string(meta, "optimizer");
  if (auto extra = meta.find("meta"); extra != meta.end()) {
    if (!extra->is_object()) schema_error(kMetaFile, 0, "meta", "expected an object of strings");
    for (const auto& [k, v] : extra->items()) {
      if (!v.is_string()) schema_error(kMetaFile, 0, "meta." + k, "expected a string");
      if (k != "optimizer") run.meta[k] = v.get<std::string>();
    }
  }
  const Json& objectives = ctx.require(meta, "objectives");
  if (!objectives.is_array()) schema_error(kMetaFile, 0, "objectives", "expected an array");
  for (const Json& o : objectives) {
    Objective obj;
    obj.name = ctx.string(o, "name");
    std::string dir = ctx.string(o, "direction");
    if (dir == "min") {
      obj.direction = Direction::Minimize;
    } else if (dir == "max") {
      obj.direction = Direction::Maximize;
    } else {
      schema_error(kMetaFile, 0, "direction", "expected \"min\" or \"max\"");
    }
    auto lower = ctx.nullable_number(o, "lower");
    auto upper = ctx.nullable_number(o, "upper");
    if (lower.has_value() != upper.has_value()) {
      schema_error(kMetaFile, 0, "lower", "bounds must both be numbers or both null");
    }
    if (lower) obj.bounds = std::make_pair(*lower, *upper);
    run.objectives.push_back(std::move(obj));
  }
  const Json& budgets = ctx.require(meta, "budgets");
  if (!budgets.is_array()) schema_error(kMetaFile, 0, "budgets", "expected an array");
  for (const Json& b : budgets) {
    if (!b.is_number()) schema_error(kMetaFile, 0, "budgets", "expected numbers");
    run.budgets.push_back(b.get<double>());
  }

  run.space = parse_space(parse_json(read_file(path / kSpaceFile), kSpaceFile));

  Json configs = parse_json(read_file(path / kConfigsFile), kConfigsFile);
  if (!configs.is_object()) schema_error(kConfigsFile, 0, "<root>", "expected an object");
  for (const auto& [id, obj] : configs.items()) run.configs.emplace(id, parse_config(run.space, obj, id));
  return run;
}

Run finish(Run run) {
  auto violations = validate_run(run);
  if (!violations.empty()) {
    std::string message = "run '" + run.name + "' is invalid: " + violations.front();
    if (violations.size() > 1) message += " (+" + std::to_string(violations.size() - 1) + " more)";
    throw Error(ErrorCode::Validation, message);
  }
  return seal(std::move(run));
}

FileStamp stamp(const fs::path& p) {
  std::error_code ec;
  FileStamp s;
  s.size = fs::file_size(p, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot stat " + p.string());
  s.mtime = fs::last_write_time(p, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot stat " + p.string());
  return s;
}

OrderedJson space_to_json(const ConfigurationSpace& space) {
  OrderedJson list = OrderedJson::array();
  for (const auto& hp : space.hyperparameters) {
    OrderedJson item;
    item["name"] = hp.name;
    item["type"] = to_string(hp.kind);
    if (hp.is_numeric()) {
      item["lower"] = hp.lower;
      item["upper"] = hp.upper;
      item["log"] = hp.log_scale;
    }
    if (hp.has_choices()) item["choices"] = hp.choices;
    item["default"] = OrderedJson::parse(to_json(hp.default_value).dump());
    if (hp.condition) {
      OrderedJson values = OrderedJson::array();
      for (const auto& v : hp.condition->active_when) values.push_back(OrderedJson::parse(to_json(v).dump()));
      item["condition"] = {{"parent", hp.condition->parent}, {"values", values}};
    } else {
      item["condition"] = nullptr;
    }
    list.push_back(std::move(item));
  }
  OrderedJson doc;
  doc["hyperparameters"] = std::move(list);
  return doc;
}

OrderedJson trial_to_json(const Trial& t) {
  OrderedJson obj;
  obj["config_id"] = t.config_id;
  obj["budget"] = t.budget;
  obj["seed"] = t.seed ? OrderedJson(*t.seed) : OrderedJson(nullptr);
  OrderedJson objs = OrderedJson::object();
  for (const auto& [name, v] : t.objectives) objs[name] = v ? OrderedJson(*v) : OrderedJson(nullptr);
  obj["objectives"] = std::move(objs);
  obj["status"] = to_string(t.status);
  obj["start"] = t.start_time;
  obj["end"] = t.end_time ? OrderedJson(*t.end_time) : OrderedJson(nullptr);
  return obj;
}

RunSource make_source(const fs::path& path, std::string_view trials_bytes) {
  RunSource source;
  source.path = path;
  source.format = RunFormat::Tabular;
  for (const char* f : kAllFiles) source.watermark[f] = stamp(path / f);
  source.trials_offset = trials_bytes.size();
  source.trials_lines = count_lines(trials_bytes);
  source.trials_terminated = trials_bytes.empty() || trials_bytes.back() == '\n';
  return source;
}

Run load_with_bytes(const fs::path& path, std::string& trials_bytes) {
  Run run = parse_header(path);
  trials_bytes = read_file(path / kTrialsFile);
  parse_trial_lines(trials_bytes, 0, run);
  return finish(std::move(run));
}

}  // namespace

RunFormat detect_format(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec) || ec) throw Error(ErrorCode::Io, "path does not exist: " + path.string());
  if (!fs::is_directory(path, ec)) return RunFormat::Unknown;
  for (const char* f : kAllFiles) {
    if (!fs::is_regular_file(path / f, ec)) return RunFormat::Unknown;
  }
  return RunFormat::Tabular;
}

Run load_tabular(const fs::path& path) {
  if (detect_format(path) != RunFormat::Tabular) {
    throw Error(ErrorCode::UnknownFormat, "unknown run format: " + path.string());
  }
  std::string bytes;
  return load_with_bytes(path, bytes);
}

void write_tabular(const Run& run, const fs::path& path) {
  auto violations = validate_run(run);
  if (!violations.empty()) {
    throw Error(ErrorCode::Validation, "refusing to write invalid run: " + violations.front());
  }
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + path.string());

  OrderedJson meta;
  meta["name"] = run.name;
  auto opt = run.meta.find("optimizer");
  meta["optimizer"] = opt == run.meta.end() ? std::string() : opt->second;
  OrderedJson objectives = OrderedJson::array();
  for (const auto& o : run.objectives) {
    OrderedJson item;
    item["name"] = o.name;
    item["direction"] = o.direction == Direction::Minimize ? "min" : "max";
    item["lower"] = o.bounds ? OrderedJson(o.bounds->first) : OrderedJson(nullptr);
    item["upper"] = o.bounds ? OrderedJson(o.bounds->second) : OrderedJson(nullptr);
    objectives.push_back(std::move(item));
  }
  meta["objectives"] = std::move(objectives);
  meta["budgets"] = run.budgets;
  OrderedJson extra = OrderedJson::object();
  for (const auto& [k, v] : run.meta) {
    if (k != "optimizer") extra[k] = v;
  }
  if (!extra.empty()) meta["meta"] = std::move(extra);
  write_file(path / kMetaFile, meta.dump(2) + "\n");

  write_file(path / kSpaceFile, space_to_json(run.space).dump(2) + "\n");

  OrderedJson configs = OrderedJson::object();
  for (const auto& [id, cfg] : run.configs) {
    OrderedJson c = OrderedJson::object();
    for (const auto& [name, v] : cfg) c[name] = OrderedJson::parse(to_json(v).dump());
    configs[id] = std::move(c);
  }
  write_file(path / kConfigsFile, configs.dump(2) + "\n");

  std::string lines;
  for (const auto& t : run.trials) lines += trial_to_json(t).dump() + "\n";
  write_file(path / kTrialsFile, lines);
}

OpenedRun open_run(const fs::path& path) {
  if (detect_format(path) != RunFormat::Tabular) {
    throw Error(ErrorCode::UnknownFormat, "unknown run format: " + path.string());
  }
  // Stamp before reading so that a concurrent append is seen on the next poll.
  std::string bytes;
  RunSource pre = make_source(path, "");
  Run run = load_with_bytes(path, bytes);
  RunSource source = make_source(path, bytes);
  if (source.watermark != pre.watermark) source.watermark[kMetaFile] = FileStamp{};
  return {std::make_shared<const Run>(std::move(run)), std::move(source)};
}

RefreshResult refresh(RunSource& source, const RunPtr& previous) {
  std::map<std::string, FileStamp> now;
  for (const char* f : kAllFiles) now[f] = stamp(source.path / f);
  if (now == source.watermark) return {previous, false};

  auto full_reload = [&]() -> RefreshResult {
    OpenedRun opened = open_run(source.path);
    source = std::move(opened.source);
    bool changed = !(*opened.run == *previous);
    return {changed ? opened.run : previous, changed};
  };

  bool headers_same = true;
  for (const char* f : {kMetaFile, kSpaceFile, kConfigsFile}) {
    if (!(now[f] == source.watermark[f])) headers_same = false;
  }
  const FileStamp& trials_now = now[kTrialsFile];
  if (!headers_same || trials_now.size < source.trials_offset || !source.trials_terminated ||
      trials_now.size == source.trials_offset) {
    return full_reload();
  }

  std::ifstream in(source.path / kTrialsFile, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + (source.path / kTrialsFile).string());
  in.seekg(static_cast<std::streamoff>(source.trials_offset));
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string tail = ss.str();
  // Wait for the writer to finish its line.
  std::size_t last_nl = tail.rfind('\n');
  if (last_nl == std::string::npos) return {previous, false};
  tail.resize(last_nl + 1);

  Run next = *previous;
  parse_trial_lines(tail, source.trials_lines, next);
  next = finish(std::move(next));
  source.trials_offset += tail.size();
  source.trials_lines += count_lines(tail);
  source.trials_terminated = true;
  source.watermark = now;
  if (source.trials_offset != trials_now.size) {
    // Part of a line is still pending; force re-examination next poll.
    source.watermark[kTrialsFile].size = source.trials_offset;
  }
  return {std::make_shared<const Run>(std::move(next)), true};
}

Run ingest_records(std::string name, ConfigurationSpace space, std::vector<Objective> objectives,
                   std::vector<double> budgets, const std::vector<TrialRecord>& records,
                   std::map<std::string, std::string> meta) {
  Run run;
  run.name = std::move(name);
  run.meta = std::move(meta);
  if (!run.meta.count("optimizer")) run.meta["optimizer"] = "";
  run.space = std::move(space);
  run.objectives = std::move(objectives);
  run.budgets = std::move(budgets);

  std::map<Config, std::string> seen;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = "record " + std::to_string(r);
    Config cfg;
    for (const auto& [hp_name, value] : rec.config) {
      auto idx = run.space.index_of(hp_name);
      if (!idx) throw_invalid(where, where + ": unknown hyperparameter '" + hp_name + "'");
      if (auto problem = check_value(run.space.at(*idx), value)) throw_invalid(where, where + ": " + *problem);
      cfg[hp_name] = *coerce_value(run.space.at(*idx), value);
    }
    for (std::size_t h = 0; h < run.space.size(); ++h) {
      bool active = is_active(run.space, cfg, h);
      bool present = cfg.count(run.space.at(h).name) > 0;
      if (active != present) {
        throw_invalid(where, where + ": hyperparameter '" + run.space.at(h).name + "' is " +
                                 (active ? "active but missing" : "inactive but set"));
      }
    }
    auto [it, inserted] = seen.emplace(cfg, "c" + std::to_string(seen.size() + 1));
    if (inserted) run.configs.emplace(it->second, cfg);

    Trial t;
    t.config_id = it->second;
    t.budget = rec.budget;
    t.seed = rec.seed;
    for (const auto& o : run.objectives) t.objectives[o.name] = std::nullopt;
    for (const auto& [k, v] : rec.objectives) t.objectives[k] = v;
    t.status = rec.status;
    t.start_time = rec.start_time;
    t.end_time = rec.end_time;
    run.trials.push_back(std::move(t));
  }
  return finish(std::move(run));
}

}  // namespace hpoviz
