#pragma once

#include <stdexcept>
#include <string>

namespace wmr {

// Every recoverable failure surfaces as one of these. Callers that need to
// branch on the failure kind catch the concrete type; everything derives from
// Error so the CLI can map any failure to an exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidLabel : Error { using Error::Error; };
struct DuplicateRun : Error { using Error::Error; };
struct UnknownParent : Error { using Error::Error; };
struct UnknownRun : Error { using Error::Error; };
struct VersionGone : Error { using Error::Error; };

struct SpecViolation : Error { using Error::Error; };
struct UnknownModel : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct PinnedModule : Error { using Error::Error; };
struct PinViolation : Error { using Error::Error; };

struct DomainError : Error { using Error::Error; };
struct NoRunaway : Error { using Error::Error; };
struct UnsupportedExponent : Error { using Error::Error; };

struct CycleRejected : Error { using Error::Error; };
struct UnknownNode : Error { using Error::Error; };
struct DuplicateNode : Error { using Error::Error; };
struct UnboundModel : Error { using Error::Error; };
struct NothingToUndo : Error { using Error::Error; };
struct NothingToRedo : Error { using Error::Error; };

struct IncompleteState : Error { using Error::Error; };
struct UnknownConstraint : Error { using Error::Error; };
struct Unauthorized : Error { using Error::Error; };

struct MalformedDescriptor : Error { using Error::Error; };

struct InvalidWeight : Error { using Error::Error; };
struct UnknownBelief : Error { using Error::Error; };
struct NoCandidates : Error { using Error::Error; };

struct EmptyArchive : Error { using Error::Error; };
struct NoValidPoints : Error { using Error::Error; };
struct NoTrajectories : Error { using Error::Error; };

struct DanglingReceipt : Error { using Error::Error; };

struct ConfigError : Error { using Error::Error; };
struct UnverifiableInvariant : Error { using Error::Error; };
struct BudgetExhausted : Error { using Error::Error; };

}  // namespace wmr
