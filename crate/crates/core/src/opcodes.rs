//! Canonical V8 Ignition opcode mnemonic universe.
//!
//! Collected from instrumented-engine logs across a large web crawl;
//! `.Wide`/`.ExtraWide` variants are distinct mnemonics. The synthetic
//! corpus generator samples from this list so generated logs exercise a
//! realistic vocabulary size.

/// Every distinct opcode mnemonic, in observed order.
pub const V8_OPCODE_MNEMONICS: &[&str] = &[
    "CreateFunctionContext", "SetKeyedProperty.Wide", "LdaLookupGlobalSlot", "PushContext",
    "GetKeyedProperty.Wide", "CreateFunctionContext.Wide", "Ldar", "GetNamedProperty.Wide",
    "JumpIfTrue.Wide", "StaCurrentContextSlot", "CallUndefinedReceiver.Wide", "JumpIfUndefined.Wide",
    "CreateMappedArguments", "ShiftRightSmi.Wide", "ForInPrepare.Wide", "Star1",
    "TestGreaterThanOrEqual.Wide", "ForInNext.Wide", "LdaCurrentContextSlot", "Add.Wide",
    "JumpIfNotNullConstant", "JumpIfToBooleanFalse", "CallProperty1.Wide", "Div.Wide",
    "Star3", "BitwiseAnd.Wide", "LdaLookupContextSlot", "GetNamedProperty",
    "TestLessThan.Wide", "ModSmi.ExtraWide", "JumpIfToBooleanTrue", "CallProperty0.Wide",
    "Star.Wide", "LdaImmutableContextSlot", "TestEqualStrict.Wide", "Ldar.Wide",
    "Star4", "ShiftLeft.Wide", "Mov.Wide", "CallProperty2",
    "AddSmi.Wide", "JumpIfNotUndefined.Wide", "Return", "BitwiseOr.Wide",
    "BitwiseXorSmi", "CreateEmptyObjectLiteral", "Dec.Wide", "BitwiseXorSmi.Wide",
    "Star5", "CallProperty2.Wide", "StaLookupSlot", "Star6",
    "Inc.Wide", "BitwiseXorSmi.ExtraWide", "CallUndefinedReceiver1", "Sub.Wide",
    "ConstructWithSpread", "CallProperty1", "TestLessThanOrEqual.Wide", "BitwiseXor.Wide",
    "LdaImmutableCurrentContextSlot", "MulSmi.Wide", "GetNamedPropertyFromSuper", "LdaConstant",
    "TestGreaterThan.Wide", "StaGlobal.Wide", "Star0", "ShiftRight.Wide",
    "CloneObject.Wide", "LdaZero", "LdaGlobal.Wide", "CreateCatchContext.Wide",
    "GetKeyedProperty", "Construct.Wide", "PushContext.Wide", "SetNamedProperty",
    "Mul.Wide", "CallRuntime.Wide", "CreateArrayLiteral", "CallProperty.Wide",
    "CallWithSpread.Wide", "CreateClosure", "Mod", "JumpIfJSReceiver.Wide",
    "LdaSmi", "ShiftRight", "Mod.Wide", "TestEqualStrict",
    "CallUndefinedReceiver0", "JumpIfUndefinedOrNull.Wide", "JumpIfFalse", "DefineKeyedOwnProperty",
    "LdaLookupSlotInsideTypeof", "SetKeyedProperty", "ToBoolean", "GetTemplateObject.Wide",
    "Add", "CreateCatchContext", "JumpIfNotUndefinedConstant", "Jump",
    "LdaTheHole", "ShiftLeftSmi.Wide", "DivSmi", "SetPendingMessage",
    "ShiftRightLogical.Wide", "CallUndefinedReceiver", "PopContext", "CallJSRuntime",
    "TestTypeOf", "DeletePropertyStrict", "ThrowReferenceErrorIfHole.Wide", "JumpIfTrue",
    "JumpIfToBooleanFalseConstant", "CallUndefinedReceiver1.ExtraWide", "LdaUndefined", "SwitchOnSmiNoFeedback",
    "Add.ExtraWide", "LdaNull", "ReThrow", "CallUndefinedReceiver2.ExtraWide",
    "Star7", "TestReferenceEqual", "SetKeyedProperty.ExtraWide", "Star8",
    "StaContextSlot", "ShiftRightLogicalSmi.Wide", "StaInArrayLiteral", "JumpIfNotNull",
    "BitwiseNot.Wide", "Star2", "JumpIfNull", "JumpLoop.ExtraWide",
    "Star", "TypeOf", "JumpIfTrueConstant.Wide", "CallProperty0",
    "ThrowReferenceErrorIfHole", "JumpConstant.Wide", "Mov", "FindNonDefaultConstructorOrConstruct",
    "PopContext.Wide", "CreateObjectLiteral", "ThrowIfNotSuperConstructor", "ToObject.Wide",
    "DefineNamedOwnProperty", "ConstructForwardAllArgs", "ForInEnumerate.Wide", "Star10",
    "CreateBlockContext", "ForInContinue.Wide", "Star9", "LdaImmutableContextSlot.Wide",
    "ForInStep.Wide", "Star11", "LdaImmutableCurrentContextSlot.Wide", "LdaModuleVariable.Wide",
    "CallProperty", "Div", "LdaModuleVariable", "Construct",
    "Negate", "StaModuleVariable", "DeletePropertySloppy", "StaContextSlot.Wide",
    "JumpIfNull.Wide", "TestGreaterThan", "LdaContextSlot.Wide", "LdaLookupGlobalSlot.Wide",
    "JumpIfUndefinedOrNull", "ToString", "LdaLookupGlobalSlotInsideTypeof", "ToObject",
    "CreateRestParameter", "Exp", "ForInEnumerate", "GetIterator",
    "LdaLookupGlobalSlotInsideTypeof.Wide", "ForInPrepare", "JumpIfJSReceiver", "Debugger",
    "ForInContinue", "CallRuntime", "ExpSmi", "CreateArrayFromIterable",
    "CreateWithContext", "JumpIfUndefined", "JumpIfNullConstant", "TestReferenceEqual.Wide",
    "Star12", "JumpIfUndefinedConstant", "DeletePropertyStrict.Wide", "Star13",
    "LdaCurrentContextSlot.Wide", "CallAnyReceiver.Wide", "TestUndefined", "StaCurrentContextSlot.Wide",
    "ShiftRightSmi.ExtraWide", "LogicalNot", "ThrowSuperAlreadyCalledIfNotHole", "ShiftLeftSmi.ExtraWide",
    "Star15", "ThrowSuperNotCalledIfHole", "StaModuleVariable.Wide", "Star14",
    "BitwiseOrSmi.Wide", "InvokeIntrinsic.Wide", "ForInStep", "TestNull",
    "SuspendGenerator.Wide", "JumpLoop", "SwitchOnGeneratorState", "ResumeGenerator.Wide",
    "Inc", "InvokeIntrinsic", "SwitchOnSmiNoFeedback.Wide", "LdaContextSlot",
    "SuspendGenerator", "Exp.Wide", "CreateEmptyArrayLiteral", "ResumeGenerator",
    "LdaLookupSlot.Wide", "LdaFalse", "SetNamedProperty.Wide", "JumpIfNotNull.Wide",
    "LdaTrue", "CallUndefinedReceiver2.Wide", "LdaLookupContextSlot.Wide", "CallUndefinedReceiver2",
    "CreateRegExpLiteral", "LdaLookupContextSlotInsideTypeof", "TestUndetectable", "CloneObject",
    "GetNamedPropertyFromSuper.Wide", "LdaGlobal", "CreateObjectLiteral.Wide", "StaLookupSlot.Wide",
    "Sub", "CallUndefinedReceiver0.Wide", "DefineNamedOwnProperty.ExtraWide", "ShiftLeft",
    "DivSmi.Wide", "SetNamedProperty.ExtraWide", "TestLessThan", "ToName",
    "GetNamedProperty.ExtraWide", "TestLessThanOrEqual", "DefineKeyedOwnPropertyInLiteral", "CreateObjectLiteral.ExtraWide",
    "ShiftLeftSmi", "GetTemplateObject", "CallUndefinedReceiver0.ExtraWide", "SubSmi",
    "CreateClosure.Wide", "LdaGlobal.ExtraWide", "BitwiseAnd", "CreateBlockContext.Wide",
    "CallProperty1.ExtraWide", "ShiftRightSmi", "LdaConstant.Wide", "Construct.ExtraWide",
    "LdaGlobalInsideTypeof", "CallUndefinedReceiver1.Wide", "CallProperty2.ExtraWide", "TestInstanceOf",
    "Negate.Wide", "CreateEvalContext.Wide", "MulSmi", "StaGlobal",
    "JumpIfFalseConstant.Wide", "ShiftRightLogicalSmi", "CreateArrayLiteral.Wide", "DeletePropertySloppy.Wide",
    "SwitchOnSmiNoFeedback.ExtraWide", "ModSmi", "StaInArrayLiteral.Wide", "Throw",
    "DefineKeyedOwnProperty.Wide", "GetKeyedProperty.ExtraWide", "AddSmi", "JumpIfUndefinedOrNullConstant",
    "DefineKeyedOwnProperty.ExtraWide", "BitwiseOr", "BitwiseXor", "StaInArrayLiteral.ExtraWide",
    "BitwiseAndSmi.ExtraWide", "GetIterator.Wide", "CreateArrayLiteral.ExtraWide", "BitwiseAndSmi.Wide",
    "DefineNamedOwnProperty.Wide", "CreateEmptyArrayLiteral.ExtraWide", "ToNumeric", "DefineKeyedOwnPropertyInLiteral.Wide",
    "ConstructWithSpread.Wide", "Dec", "AddSmi.ExtraWide", "BitwiseAndSmi",
    "CreateEmptyArrayLiteral.Wide", "CallUndefinedReceiver.ExtraWide", "CallProperty.ExtraWide", "LdaSmi.ExtraWide",
    "TestEqual.Wide", "CallJSRuntime.Wide", "ShiftRightLogical", "SubSmi.ExtraWide",
    "CallProperty0.ExtraWide", "LdaSmi.Wide", "LdaLookupSlot", "GetSuperConstructor",
    "TestGreaterThanOrEqual", "CallRuntimeForPair", "CreateClosure.ExtraWide", "SubSmi.Wide",
    "CallAnyReceiver", "LdaConstant.ExtraWide", "CreateUnmappedArguments", "ToNumeric.Wide",
    "FindNonDefaultConstructorOrConstruct.Wide", "TestIn", "CreateRegExpLiteral.Wide", "ThrowIfNotSuperConstructor.Wide",
    "ToBooleanLogicalNot", "TestInstanceOf.Wide", "JumpIfToBooleanFalseConstant.Wide", "Mul",
    "ModSmi.Wide", "JumpIfToBooleanTrueConstant.Wide", "ToNumber", "CallWithSpread",
    "CreateWithContext.Wide", "JumpIfNotUndefined", "JumpIfToBooleanTrue.Wide", "CallRuntimeForPair.Wide",
    "BitwiseOrSmi", "JumpIfFalse.Wide", "TestEqual.ExtraWide", "JumpLoop.Wide",
    "Jump.Wide", "BitwiseAnd.ExtraWide", "MulSmi.ExtraWide", "DivSmi.ExtraWide",
    "TestEqualStrict.ExtraWide", "TestEqual", "ToNumber.Wide", "CreateRegExpLiteral.ExtraWide",
    "BitwiseNot", "BitwiseOrSmi.ExtraWide", "GetTemplateObject.ExtraWide", "JumpIfTrueConstant",
    "CreateEvalContext", "CloneObject.ExtraWide", "JumpIfToBooleanTrueConstant", "JumpConstant",
    "LdaGlobalInsideTypeof.Wide", "JumpIfFalseConstant", "JumpIfToBooleanFalse.Wide",
];
