#pragma once

#include <map>
#include <string>
#include <vector>

namespace ubiphysio {

// Flat key=value configuration, one pair per line; '#' starts a comment.
using KvMap = std::map<std::string, std::string>;

KvMap parse_kv(const std::string& text);
std::string format_kv(const KvMap& kv);

double kv_double(const std::string& key, const std::string& value);
long kv_long(const std::string& key, const std::string& value);
bool kv_bool(const std::string& key, const std::string& value);
std::vector<int> kv_int_list(const std::string& key, const std::string& value);
std::string format_double(double v);

}  // namespace ubiphysio
