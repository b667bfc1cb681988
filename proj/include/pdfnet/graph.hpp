#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "pdfnet/ops.hpp"
#include "pdfnet/tensor.hpp"

namespace pdfnet {

enum class NodeKind { Input, Conv, Pool, Upsample, Concat };

// One operation in the static computation graph. Inputs always refer to
// earlier nodes, so node order is a topological order by construction.
struct NodeSpec {
    NodeKind kind = NodeKind::Input;
    std::string name;
    std::vector<int> inputs;
    int out_channels = 0;
    int divisor = 1;   // spatial divisor relative to the network input
    Act act = Act::None;
    int factor = 1;    // upsample only
    int weight = -1;   // param ids, conv only
    int bias = -1;
};

struct ParamShape {
    std::string name;
    int rank = 4;
    std::array<int, 4> dims{1, 1, 1, 1};

    std::size_t count() const {
        std::size_t n = 1;
        for (int i = 0; i < rank; ++i) n *= static_cast<std::size_t>(dims[i]);
        return n;
    }
};

// Named parameter slot; grad stays empty until training first touches it.
template <typename T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
};

template <typename T>
class ParamStore {
public:
    int add(const std::string& name, Tensor<T> value) {
        if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
        const int id = static_cast<int>(params_.size());
        index_.emplace(name, id);
        params_.push_back(Param<T>{name, std::move(value), Tensor<T>()});
        return id;
    }

    Param<T>& at(int id) { return params_.at(static_cast<std::size_t>(id)); }
    const Param<T>& at(int id) const { return params_.at(static_cast<std::size_t>(id)); }

    Param<T>& at(const std::string& name) { return params_.at(static_cast<std::size_t>(id_of(name))); }
    const Param<T>& at(const std::string& name) const {
        return params_.at(static_cast<std::size_t>(id_of(name)));
    }

    int id_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
        return it->second;
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    std::size_t size() const { return params_.size(); }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.value.size();
        return n;
    }

    void zero_grads() {
        for (auto& p : params_) {
            if (p.grad.empty()) p.grad = Tensor<T>::zeros_like(p.value);
            else p.grad.fill(T(0));
        }
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    std::vector<Param<T>> params_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace pdfnet
