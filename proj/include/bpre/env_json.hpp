#ifndef BPRE_ENV_JSON_HPP
#define BPRE_ENV_JSON_HPP

#include <string>

#include <json.hpp>

#include "bpre/model.hpp"

namespace bpre::model {

// Environment JSON schema:
//   {"p": int, "atoms": [{"prob": float,
//                         "laws": [[{"z": [int, ... p], "p": float}, ...] x p]}]}
// Validation errors carry the path of the offending element.
EnvDistribution env_from_json(const nlohmann::json& j);
EnvDistribution load_env_file(const std::string& path);

nlohmann::ordered_json env_to_json(const EnvDistribution& env);

}  // namespace bpre::model

#endif
