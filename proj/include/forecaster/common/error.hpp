#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace forecaster {

// Error codes shared by every module. The string form is what the REST layer
// reports in the `code` field of an error body.
enum class ErrorCode {
	// dataset ingest
	TooLarge,
	DuplicateName,
	BadName,
	Unparseable,
	NoTime,
	MultipleTime,
	NoTarget,
	MultipleGrouping,
	TypeMismatch,
	UnknownColumn,
	TooShort,
	DuplicateTimestamps,
	MixedKinds,
	// series model
	NonConstantStatic,
	ExcessiveGaps,
	EmptyGroup,
	OffGrid,
	UnknownName,
	TestTooLong,
	InitialTooLong,
	BadStride,
	BadHorizon,
	// forecast models
	InvalidParameter,
	MissingRequiredCovariate,
	SeriesShorterThanK,
	NonFiniteLoss,
	TooFewWindows,
	SingularSystem,
	NotFitted,
	BadArtifact,
	// metrics
	LengthMismatch,
	EmptyInput,
	AlignmentError,
	// jobs and service
	ValidationFailed,
	DatasetNotFound,
	JobNotFound,
	UnknownJob,
	StaleUpdate,
	ModelArtifactMissing,
	CovariateSchemaMismatch,
	NotFound,
	Conflict,
	Unauthorized,
	Forbidden,
	StoreError,
	Internal,
};

inline std::string_view to_string(ErrorCode code) {
	switch (code) {
	case ErrorCode::TooLarge: return "TooLarge";
	case ErrorCode::DuplicateName: return "DuplicateName";
	case ErrorCode::BadName: return "BadName";
	case ErrorCode::Unparseable: return "Unparseable";
	case ErrorCode::NoTime: return "NoTime";
	case ErrorCode::MultipleTime: return "MultipleTime";
	case ErrorCode::NoTarget: return "NoTarget";
	case ErrorCode::MultipleGrouping: return "MultipleGrouping";
	case ErrorCode::TypeMismatch: return "TypeMismatch";
	case ErrorCode::UnknownColumn: return "UnknownColumn";
	case ErrorCode::TooShort: return "TooShort";
	case ErrorCode::DuplicateTimestamps: return "DuplicateTimestamps";
	case ErrorCode::MixedKinds: return "MixedKinds";
	case ErrorCode::NonConstantStatic: return "NonConstantStatic";
	case ErrorCode::ExcessiveGaps: return "ExcessiveGaps";
	case ErrorCode::EmptyGroup: return "EmptyGroup";
	case ErrorCode::OffGrid: return "OffGrid";
	case ErrorCode::UnknownName: return "UnknownName";
	case ErrorCode::TestTooLong: return "TestTooLong";
	case ErrorCode::InitialTooLong: return "InitialTooLong";
	case ErrorCode::BadStride: return "BadStride";
	case ErrorCode::BadHorizon: return "BadHorizon";
	case ErrorCode::InvalidParameter: return "InvalidParameter";
	case ErrorCode::MissingRequiredCovariate: return "MissingRequiredCovariate";
	case ErrorCode::SeriesShorterThanK: return "SeriesShorterThanK";
	case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
	case ErrorCode::TooFewWindows: return "TooFewWindows";
	case ErrorCode::SingularSystem: return "SingularSystem";
	case ErrorCode::NotFitted: return "NotFitted";
	case ErrorCode::BadArtifact: return "BadArtifact";
	case ErrorCode::LengthMismatch: return "LengthMismatch";
	case ErrorCode::EmptyInput: return "EmptyInput";
	case ErrorCode::AlignmentError: return "AlignmentError";
	case ErrorCode::ValidationFailed: return "ValidationFailed";
	case ErrorCode::DatasetNotFound: return "DatasetNotFound";
	case ErrorCode::JobNotFound: return "JobNotFound";
	case ErrorCode::UnknownJob: return "UnknownJob";
	case ErrorCode::StaleUpdate: return "StaleUpdate";
	case ErrorCode::ModelArtifactMissing: return "ModelArtifactMissing";
	case ErrorCode::CovariateSchemaMismatch: return "CovariateSchemaMismatch";
	case ErrorCode::NotFound: return "NotFound";
	case ErrorCode::Conflict: return "Conflict";
	case ErrorCode::Unauthorized: return "Unauthorized";
	case ErrorCode::Forbidden: return "Forbidden";
	case ErrorCode::StoreError: return "StoreError";
	case ErrorCode::Internal: return "Internal";
	}
	return "Internal";
}

class Error : public std::runtime_error {
public:
	Error(ErrorCode code, const std::string &message, std::string field = {})
	    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message),
	      field_(std::move(field)) {
	}

	ErrorCode code() const noexcept {
		return code_;
	}
	// Message without the code prefix.
	const std::string &message() const noexcept {
		return message_;
	}
	// Offending column, parameter key, or request field, when there is one.
	const std::string &field() const noexcept {
		return field_;
	}

private:
	ErrorCode code_;
	std::string message_;
	std::string field_;
};

} // namespace forecaster
